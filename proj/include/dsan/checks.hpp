// SPDX-License-Identifier: Apache-2.0
//
// Oracle and invariant checks shared by the `selftest` command and the
// acceptance runner. Each check reports the measured quantity it compared.
#pragma once

#include "dsan/bench.hpp"

#include <functional>
#include <string>
#include <vector>

namespace dsan::checks {

struct Result {
    std::string name;
    bool passed = false;
    std::string detail;
};

// dsa against the direct oracle over every K in {1,3,5,7}, d in {1..4},
// both directions and 1 or 4 groups (64 random cases, double precision).
Result dsa_matches_oracle();
// dsa at d = 1 is bitwise identical to the contiguous strip kernel on the same cases.
Result dilation_one_is_plain_strip_attention();
// DSAM and full model parameter counts do not depend on d and match the
// hand-written counters.
Result parameter_count_invariance();
// Nonzero input-gradient set of one interior DSAM output under constant
// coefficients equals receptive_field_footprint(K, d).
Result dsam_footprint();
// Central differences of the full model plus total_loss on a 1x3x16x16 input.
Result model_gradient();
// Parseval, frequency_l1 against the direct DFT, zero loss on identical pairs.
Result fft_and_losses();
// Schedule endpoints and a 10-step Adam trajectory against the scalar oracle.
Result optimizer_and_schedule();
// PSNR / SSIM closed forms and naive oracles.
Result metrics();
// Convolution kernels against direct and zero-stuffing oracles, ops gradients.
Result tensor_ops();
// PPM round trip and degradation identities.
Result data_pipeline();
// dsa cost per pixel varies by less than 25% across d at every K.
Result dilation_is_free(const BenchOptions& options);

struct Suite {
    std::string module;
    std::vector<std::function<Result()>> checks;
};

// Every deterministic suite, grouped by module (timing checks excluded).
std::vector<Suite> selftest_suites();

} // namespace dsan::checks

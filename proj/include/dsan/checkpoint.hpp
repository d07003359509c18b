// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, all integers little-endian:
//
//   "DSAN" | u32 version | u32 len, key=value lines (model config + dtype)
//   u32 record count | records
//   [ "ADAM" | u32 len, key=value lines (step, hyperparameters)
//     u32 record count | records named m/<param> and v/<param> ]
//   u32 CRC32 of every preceding byte
//
// record: u32 name length | name | u32 rank | u64 dims[rank] | payload
// The payload holds f32 or f64 values according to `dtype`.
#pragma once

#include "dsan/model.hpp"
#include "dsan/optimizer.hpp"

#include <filesystem>
#include <optional>

namespace dsan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct LoadedCheckpoint {
    DsanModel<T> model;
    std::optional<AdamState<T>> adam;
};

// Written to a sibling temporary and renamed, so an existing file is never
// left half-written.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const DsanModel<T>& model,
                     const AdamState<T>* adam = nullptr);

// Throws IoError on bad magic, version mismatch, truncation, CRC failure or
// records that disagree with the stored configuration. Values stored with
// the other precision are converted.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path);

template <typename T>
void save_model(const std::filesystem::path& path, const DsanModel<T>& model)
{
    save_checkpoint<T>(path, model, nullptr);
}

template <typename T>
DsanModel<T> load_model(const std::filesystem::path& path)
{
    return load_checkpoint<T>(path).model;
}

} // namespace dsan

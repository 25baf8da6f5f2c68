// Copyright (c) The sdrf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "sdrf/field.hpp"
#include "sdrf/trainer.hpp"

namespace sdrf {

/// Field construction settings as they appear in the run config.
struct FieldConfig {
    std::array<int, 3> resolution{32, 32, 32};
    Vec3 bbox_min{-1.0, -1.0, -1.0};
    Vec3 bbox_max{1.0, 1.0, 1.0};
    FieldInit init = FieldInit::Blob;
    double blob_peak_density = 5.0;
    double blob_sigma_frac = 0.25;

    VoxelField make() const;
};

/// One fit run, as loaded from a JSON config file. Angles are written in
/// degrees in the file and stored in radians here.
struct RunConfig {
    std::filesystem::path output_dir = "out";
    FieldConfig field;
    TrainConfig train;
    std::filesystem::path target_image;  // required by target-latent / guided oracles
};

/// Name of the environment variable that, when set, re-roots every relative
/// output directory.
extern const char* const kOutputRootEnv;

/// Applies kOutputRootEnv to a caller-supplied output path.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

/// Parses and validates a run config. Unknown keys anywhere in the document
/// are rejected; referenced files must exist. Throws ConfigError with the
/// offending key in the message.
RunConfig load_run_config(const std::filesystem::path& path);

/// Loads the configured oracle target image (when the variant needs one) and
/// fills train.oracle.target_latent via the run's codec.
void prepare_oracle(RunConfig& config);

/// Serializes every effective value, suitable for provenance copies;
/// load(save(c)) is semantically identical to c.
std::string run_config_to_json(const RunConfig& config);
void save_run_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace sdrf

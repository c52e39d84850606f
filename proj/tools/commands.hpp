// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>

#include "gdres/gdres.hpp"

namespace gdres::cli {

/// Exit status 1: the command ran but a check it performs did not pass.
class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each registers a subcommand whose callback does the work.
void add_gen_dataset(CLI::App& app);
void add_train(CLI::App& app);
void add_eval(CLI::App& app);
void add_covariance_check(CLI::App& app);
void add_export(CLI::App& app);
void add_kernel_dump(CLI::App& app);

/// Creates `dir`, refusing a non-empty directory unless `force`.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Creates the parent directory of an output file.
void prepare_output_file(const std::filesystem::path& file);

/// Reads a .gdt tensor or a PGM/PPM image.
Tensor read_image(const std::filesystem::path& path);

void log(const std::string& msg);

}  // namespace gdres::cli

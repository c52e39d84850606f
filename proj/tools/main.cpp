// SPDX-License-Identifier: Apache-2.0
//
// gdres command-line tool. Exit status: 0 success, 1 a check failed or the
// run broke down, 2 bad invocation or unusable input.
#include <cstdio>
#include <iostream>

#include "commands.hpp"

namespace gdres::cli {

void prepare_output_dir(const std::filesystem::path& dir, bool force) {
  if (std::filesystem::exists(dir)) {
    if (!std::filesystem::is_directory(dir)) throw InvalidArgument(dir.string() + " exists and is not a directory");
    if (!std::filesystem::is_empty(dir)) {
      if (!force) throw InvalidArgument(dir.string() + " is not empty; pass --force to overwrite");
      std::filesystem::remove_all(dir);
    }
  }
  std::filesystem::create_directories(dir);
}

void prepare_output_file(const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
}

Tensor read_image(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return read_pnm(path);
  return read_tensor(path);
}

void log(const std::string& msg) {
  std::fprintf(stderr, "%s\n", msg.c_str());
  std::fflush(stderr);
}

}  // namespace gdres::cli

int main(int argc, char** argv) {
  using namespace gdres;
  CLI::App app{"Scale-covariant Gaussian derivative networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gdres 0.1.0");
  cli::add_gen_dataset(app);
  cli::add_train(app);
  cli::add_eval(app);
  cli::add_covariance_check(app);
  cli::add_export(app);
  cli::add_kernel_dump(app);

  // Subcommand callbacks run inside parse().
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const cli::CheckFailed& e) {
    std::cerr << "check failed: " << e.what() << "\n";
    return 1;
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    // Bad arguments, mismatched or unreadable inputs.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

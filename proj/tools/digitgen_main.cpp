// Writes a synthetic digit corpus as an IDX image/label pair.

#include <CLI11.hpp>
#include <iostream>

#include "csproxy/errors.hpp"
#include "digitgen.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic MNIST-style digit corpus generator"};
  std::size_t count = 6000;
  std::uint64_t seed = 42;
  std::string images_path = "digits-images.idx";
  std::string labels_path = "digits-labels.idx";
  app.add_option("--count", count, "number of images");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--images", images_path, "output IDX image file");
  app.add_option("--labels", labels_path, "output IDX label file");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto set = csproxy::digitgen::generate(count, seed);
    csproxy::save_idx(set, images_path, labels_path);
    std::cout << "wrote " << set.size() << " images (" << set.height << "x"
              << set.width << ") to " << images_path << " / " << labels_path
              << "\n";
  } catch (const csproxy::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

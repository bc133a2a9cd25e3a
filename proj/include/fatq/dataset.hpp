#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fatq/numerics.hpp"

namespace fatq::dataset {

// Single-channel image classification set; pixel values in [0, 1].
struct Dataset {
    std::size_t image_size = 16;
    std::size_t classes = 4;
    std::vector<std::vector<double>> images;  // image_size^2 each
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
};

// Bundled synthetic corpus: oriented sinusoidal gratings, one orientation per
// class, with random frequency, phase and mild noise. Deterministic in the seed.
Dataset make_oriented_dataset(std::uint64_t seed, std::size_t count,
                              std::size_t image_size = 16, std::size_t classes = 4);

// Optional loader for an MNIST-format (IDX) corpus: 28x28 images are 2x2
// average-pooled to 14x14 and zero-padded to 16x16. Not used by the bundled
// pipeline or tests.
Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path);

}  // namespace fatq::dataset

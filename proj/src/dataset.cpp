#include "fatq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace fatq::dataset {

Dataset make_oriented_dataset(std::uint64_t seed, std::size_t count,
                              std::size_t image_size, std::size_t classes) {
    if (count == 0 || image_size == 0 || classes == 0) {
        throw std::invalid_argument("make_oriented_dataset: count/size/classes must be >= 1");
    }
    numerics::RngState rng(seed);
    Dataset ds;
    ds.image_size = image_size;
    ds.classes = classes;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    const double side = static_cast<double>(image_size);
    const double sector = M_PI / static_cast<double>(classes);
    for (std::size_t i = 0; i < count; ++i) {
        const int label = static_cast<int>(i % classes);
        // Orientation jitter keeps samples inside the class sector but off
        // the canonical angle; contrast and noise keep the task unsaturated.
        const double theta = sector * static_cast<double>(label) +
                             rng.next_uniform(-0.25, 0.25) * sector;
        const double freq = 2.0 + static_cast<double>(rng.next_index(4));  // cycles per side
        const double phase = rng.next_uniform(0.0, 2.0 * M_PI);
        const double contrast = rng.next_uniform(0.25, 0.5);
        std::vector<double> img(image_size * image_size);
        for (std::size_t y = 0; y < image_size; ++y) {
            for (std::size_t x = 0; x < image_size; ++x) {
                const double u = static_cast<double>(x) * std::cos(theta) +
                                 static_cast<double>(y) * std::sin(theta);
                double v = 0.5 + contrast * std::sin(2.0 * M_PI * freq * u / side + phase) +
                           0.12 * rng.next_uniform(-1.0, 1.0);
                img[y * image_size + x] = std::clamp(v, 0.0, 1.0);
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw std::runtime_error("truncated IDX header in " + path);
    return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
           (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

}  // namespace

Dataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img_in(images_path, std::ios::binary);
    if (!img_in) {
        throw std::runtime_error("cannot open " + images_path +
                                 "; place an MNIST-format IDX image file there "
                                 "(e.g. train-images-idx3-ubyte) or use the bundled "
                                 "synthetic dataset");
    }
    std::ifstream lbl_in(labels_path, std::ios::binary);
    if (!lbl_in) {
        throw std::runtime_error("cannot open " + labels_path +
                                 "; place the matching IDX label file there "
                                 "(e.g. train-labels-idx1-ubyte)");
    }
    if (read_be32(img_in, images_path) != 0x803) {
        throw std::runtime_error(images_path + ": not an IDX3 image file");
    }
    const std::uint32_t count = read_be32(img_in, images_path);
    const std::uint32_t rows = read_be32(img_in, images_path);
    const std::uint32_t cols = read_be32(img_in, images_path);
    if (rows != 28 || cols != 28) {
        throw std::runtime_error(images_path + ": expected 28x28 images");
    }
    if (read_be32(lbl_in, labels_path) != 0x801) {
        throw std::runtime_error(labels_path + ": not an IDX1 label file");
    }
    const std::uint32_t label_count = read_be32(lbl_in, labels_path);
    if (label_count != count) {
        throw std::runtime_error("image/label counts differ between " + images_path +
                                 " and " + labels_path);
    }

    Dataset ds;
    ds.image_size = 16;
    ds.classes = 10;
    ds.images.reserve(count);
    ds.labels.reserve(count);
    std::vector<unsigned char> raw(28 * 28);
    for (std::uint32_t i = 0; i < count; ++i) {
        img_in.read(reinterpret_cast<char*>(raw.data()), raw.size());
        char label = 0;
        lbl_in.read(&label, 1);
        if (!img_in || !lbl_in) throw std::runtime_error("truncated IDX payload");
        std::vector<double> img(16 * 16, 0.0);
        for (std::size_t y = 0; y < 14; ++y) {
            for (std::size_t x = 0; x < 14; ++x) {
                double acc = 0.0;
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        acc += raw[(2 * y + dy) * 28 + (2 * x + dx)];
                    }
                }
                img[(y + 1) * 16 + (x + 1)] = acc / (4.0 * 255.0);
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace fatq::dataset

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "slr/tensor.hpp"

namespace slr {

// Shared on-disk container: 8-byte magic, text manifest lines, a terminating
// `blob <nbytes>` line, then a raw little-endian float32 block.
struct BlobFile {
    std::vector<std::string> manifest;
    std::vector<float> blob;

    static BlobFile load(const std::string& path, const std::string& magic);
    void save(const std::string& path, const std::string& magic) const;

    // Copies rows*cols floats starting at *offset into a Tensor2, advancing *offset.
    Tensor2 take(std::size_t* offset, std::size_t rows, std::size_t cols,
                 const std::string& path) const;
    void append(const Tensor2& t);
};

}  // namespace slr

#include "slr/blobfile.hpp"

#include <fstream>
#include <stdexcept>

namespace slr {

BlobFile BlobFile::load(const std::string& path, const std::string& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string got(magic.size(), '\0');
    in.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!in || got != magic)
        throw std::runtime_error(path + ": bad magic at offset 0 (want `" + magic + "`)");
    BlobFile f;
    std::string line;
    std::size_t nbytes = 0;
    bool saw_blob = false;
    while (std::getline(in, line)) {
        if (line.rfind("blob ", 0) == 0) {
            nbytes = std::stoull(line.substr(5));
            saw_blob = true;
            break;
        }
        if (!line.empty()) f.manifest.push_back(line);
    }
    if (!saw_blob)
        throw std::runtime_error(path + ": missing `blob <nbytes>` terminator at offset " +
                                 std::to_string(in.tellg() == -1 ? 0 : (long long)in.tellg()));
    if (nbytes % sizeof(float) != 0)
        throw std::runtime_error(path + ": blob length " + std::to_string(nbytes) +
                                 " not a multiple of 4");
    f.blob.resize(nbytes / sizeof(float));
    in.read(reinterpret_cast<char*>(f.blob.data()), static_cast<std::streamsize>(nbytes));
    if (static_cast<std::size_t>(in.gcount()) != nbytes)
        throw std::runtime_error(path + ": truncated blob, wanted " + std::to_string(nbytes) +
                                 " bytes, got " + std::to_string(in.gcount()));
    return f;
}

void BlobFile::save(const std::string& path, const std::string& magic) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    for (const auto& line : manifest) out << line << "\n";
    out << "blob " << blob.size() * sizeof(float) << "\n";
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw std::runtime_error("write failed: " + path);
}

Tensor2 BlobFile::take(std::size_t* offset, std::size_t rows, std::size_t cols,
                       const std::string& path) const {
    if (*offset + rows * cols > blob.size())
        throw std::runtime_error(path + ": manifest/blob length mismatch at float offset " +
                                 std::to_string(*offset));
    Tensor2 t(rows, cols);
    for (std::size_t i = 0; i < rows * cols; ++i) t.data[i] = blob[*offset + i];
    *offset += rows * cols;
    return t;
}

void BlobFile::append(const Tensor2& t) {
    for (double v : t.data) blob.push_back(static_cast<float>(v));
}

}  // namespace slr

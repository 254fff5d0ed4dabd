#include "rocgan/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "rocgan/errors.hpp"

namespace rocgan {

namespace {

constexpr std::uint8_t kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr std::size_t kFixedHeader = 8;

template <class U>
void put_le(std::vector<std::uint8_t>& out, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <class U>
U get_le(const std::uint8_t* p) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t, DType dtype) {
    const Shape& shape = t.shape();
    if (shape.size() > std::numeric_limits<std::uint8_t>::max()) throw FormatError("TNSR supports at most 255 dims");
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(kTnsrVersion);
    out.push_back(static_cast<std::uint8_t>(dtype));
    out.push_back(static_cast<std::uint8_t>(shape.size()));
    out.push_back(0);
    for (auto d : shape) {
        if (d > std::numeric_limits<std::uint32_t>::max()) throw FormatError("TNSR dimension exceeds u32");
        put_le(out, static_cast<std::uint32_t>(d));
    }
    const auto data = t.data();
    out.reserve(out.size() + data.size() * (dtype == DType::f32 ? 4 : 8));
    for (double v : data) {
        if (dtype == DType::f32)
            put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        else
            put_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFixedHeader) throw FormatError("TNSR: truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("TNSR: bad magic");
    if (bytes[4] != kTnsrVersion) throw FormatError("TNSR: unsupported version " + std::to_string(bytes[4]));
    const std::uint8_t dtype = bytes[5];
    if (dtype != static_cast<std::uint8_t>(DType::f32) && dtype != static_cast<std::uint8_t>(DType::f64))
        throw FormatError("TNSR: unknown dtype " + std::to_string(dtype));
    const std::size_t ndim = bytes[6];
    if (bytes.size() < kFixedHeader + 4 * ndim) throw FormatError("TNSR: truncated dims");
    Shape shape(ndim);
    for (std::size_t i = 0; i < ndim; ++i) {
        shape[i] = get_le<std::uint32_t>(bytes.data() + kFixedHeader + 4 * i);
        if (shape[i] == 0) throw FormatError("TNSR: zero-length dimension");
    }
    const std::size_t count = shape_numel(shape);
    const std::size_t width = dtype == static_cast<std::uint8_t>(DType::f32) ? 4 : 8;
    const std::size_t offset = kFixedHeader + 4 * ndim;
    if (bytes.size() - offset != count * width)
        throw FormatError("TNSR: payload has " + std::to_string(bytes.size() - offset) + " bytes, expected " +
                          std::to_string(count * width));
    std::vector<double> data(count);
    const std::uint8_t* p = bytes.data() + offset;
    for (std::size_t i = 0; i < count; ++i, p += width) {
        data[i] = width == 4 ? static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)))
                             : std::bit_cast<double>(get_le<std::uint64_t>(p));
    }
    return Tensor::from(std::move(shape), std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t, DType dtype) {
    const auto bytes = encode_tensor(t, dtype);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw FormatError("write failed: " + path);
}

Tensor read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

}  // namespace rocgan

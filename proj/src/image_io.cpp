#include "wskp/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "wskp/errors.hpp"

namespace wskp {

namespace {

struct ParsedHeader {
    ImageHeader header;
    std::streamoff payload_offset = 0;
};

std::string next_token(std::istream& in)
{
    std::string token;
    int ch = in.get();
    while (ch != EOF && std::isspace(ch)) {
        ch = in.get();
    }
    while (ch != EOF && !std::isspace(ch)) {
        token.push_back(static_cast<char>(ch));
        ch = in.get();
    }
    // The single whitespace byte after the scale token terminates the header,
    // so it is consumed here and never put back.
    return token;
}

int parse_positive(const std::string& token, const char* what)
{
    std::size_t used = 0;
    long value = 0;
    try {
        value = std::stol(token, &used);
    } catch (const std::exception&) {
        throw ParseError(std::string("PFM: malformed ") + what + " '" + token + "'");
    }
    if (used != token.size()) {
        throw ParseError(std::string("PFM: malformed ") + what + " '" + token + "'");
    }
    if (value <= 0 || value > (1L << 20)) {
        throw ParseError(std::string("PFM: ") + what + " must be positive, got " + token);
    }
    return static_cast<int>(value);
}

ParsedHeader parse_header(std::istream& in, const std::filesystem::path& path)
{
    ParsedHeader parsed;
    const std::string magic = next_token(in);
    if (magic == "PF") {
        parsed.header.format = ImageFormat::pfm_color;
    } else if (magic == "Pf") {
        parsed.header.format = ImageFormat::pfm_gray;
    } else {
        throw ParseError("PFM: bad magic '" + magic + "' in " + path.string());
    }
    parsed.header.width = parse_positive(next_token(in), "width");
    parsed.header.height = parse_positive(next_token(in), "height");
    const std::string scale = next_token(in);
    try {
        std::size_t used = 0;
        parsed.header.scale = std::stof(scale, &used);
        if (used != scale.size()) {
            throw ParseError("PFM: malformed scale '" + scale + "'");
        }
    } catch (const std::logic_error&) {
        throw ParseError("PFM: malformed scale '" + scale + "'");
    }
    if (parsed.header.scale == 0.0f || !std::isfinite(parsed.header.scale)) {
        throw ParseError("PFM: scale must be finite and non-zero");
    }
    if (!in) {
        throw ParseError("PFM: truncated header in " + path.string());
    }
    parsed.payload_offset = in.tellg();
    return parsed;
}

std::uint32_t byteswap32(std::uint32_t v)
{
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

} // namespace

ImageHeader read_pfm_header(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return parse_header(in, path).header;
}

Tensor read_pfm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const ParsedHeader parsed = parse_header(in, path);
    const ImageHeader& h = parsed.header;
    const int channels = h.format == ImageFormat::pfm_color ? 3 : 1;
    const std::size_t row_floats = static_cast<std::size_t>(h.width) * channels;
    std::vector<std::uint32_t> bits(row_floats * h.height);
    in.read(reinterpret_cast<char*>(bits.data()),
            static_cast<std::streamsize>(bits.size() * sizeof(std::uint32_t)));
    if (static_cast<std::size_t>(in.gcount()) != bits.size() * sizeof(std::uint32_t)) {
        throw IoError("PFM: truncated payload in " + path.string());
    }
    const bool file_little = h.scale < 0.0f;
    const bool host_little = std::endian::native == std::endian::little;
    if (file_little != host_little) {
        for (auto& b : bits) {
            b = byteswap32(b);
        }
    }
    Tensor out(h.height, h.width, channels);
    for (int row = 0; row < h.height; ++row) {
        const std::uint32_t* src = bits.data() + static_cast<std::size_t>(row) * row_floats;
        std::memcpy(out.pixel(h.height - 1 - row, 0), src, row_floats * sizeof(float));
    }
    return out;
}

void write_pfm(const Tensor& tensor, const std::filesystem::path& path)
{
    if (tensor.channels() != 1 && tensor.channels() != 3) {
        throw UnsupportedChannels("PFM supports 1 or 3 channels, got " +
                                  std::to_string(tensor.channels()));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    const bool host_little = std::endian::native == std::endian::little;
    out << (tensor.channels() == 3 ? "PF" : "Pf") << '\n'
        << tensor.width() << ' ' << tensor.height() << '\n'
        << (host_little ? "-1.0" : "1.0") << '\n';
    const std::size_t row_floats = static_cast<std::size_t>(tensor.width()) * tensor.channels();
    for (int row = tensor.height() - 1; row >= 0; --row) {
        out.write(reinterpret_cast<const char*>(tensor.pixel(row, 0)),
                  static_cast<std::streamsize>(row_floats * sizeof(float)));
    }
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

void write_png(const Tensor& tensor, const std::filesystem::path& path)
{
    if (tensor.channels() != 1 && tensor.channels() != 3) {
        throw UnsupportedChannels("PNG preview supports 1 or 3 channels");
    }
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"),
                                                        &std::fclose);
    if (!file) {
        throw IoError("cannot write " + path.string());
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, nullptr);
        throw ResourceError("libpng initialisation failed");
    }
    const int w = tensor.width();
    const int h = tensor.height();
    std::vector<png_byte> rgb(static_cast<std::size_t>(w) * h * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = tensor.at(y, x, tensor.channels() == 3 ? c : 0);
                const float clamped = std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f);
                rgb[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<png_byte>(std::lround(clamped * 255.0f));
            }
        }
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, rgb.data() + static_cast<std::size_t>(y) * w * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace wskp

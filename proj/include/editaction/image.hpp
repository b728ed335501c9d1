// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace editaction {

/// RGB image, row-major HWC, channel values in [-1, 1].
///
/// [0, 255] only appears at file boundaries (read_image / write_image).
class Image {
public:
    Image() = default;
    Image(int height, int width, float fill = 0.0F);

    int height() const { return height_; }
    int width() const { return width_; }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<float> data() { return data_; }
    std::span<const float> data() const { return data_; }

    void fill_rgb(float r, float g, float b);
    void clip();

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int y, int x, int c) const
    {
        return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
    }

    int height_ = 0;
    int width_ = 0;
    std::vector<float> data_;
};

std::uint8_t to_byte(float v);
float from_byte(std::uint8_t v);

/// Quantizes through the 8-bit file representation.
Image quantize(const Image& img);

/// Lossless 8-bit RGB (PNG). Throws std::runtime_error on I/O failure.
void write_image(const std::filesystem::path& path, const Image& img);
Image read_image(const std::filesystem::path& path);

/// Horizontal strip of equally sized images.
Image hconcat(std::span<const Image> images);
/// Vertical stack of equally sized images.
Image vconcat(std::span<const Image> images);

} // namespace editaction

// SPDX-License-Identifier: Apache-2.0
#include "editaction/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace editaction {

Image::Image(int height, int width, float fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width * 3, fill)
{
    if (height < 0 || width < 0) {
        throw std::invalid_argument("Image: negative dimensions");
    }
}

void Image::fill_rgb(float r, float g, float b)
{
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = r;
        data_[i + 1] = g;
        data_[i + 2] = b;
    }
}

void Image::clip()
{
    for (auto& v : data_) {
        v = std::clamp(v, -1.0F, 1.0F);
    }
}

std::uint8_t to_byte(float v)
{
    const float s = std::round((std::clamp(v, -1.0F, 1.0F) + 1.0F) * 127.5F);
    return static_cast<std::uint8_t>(std::clamp(s, 0.0F, 255.0F));
}

float from_byte(std::uint8_t v)
{
    return static_cast<float>(v) / 127.5F - 1.0F;
}

Image quantize(const Image& img)
{
    Image out = img;
    for (auto& v : out.data()) {
        v = from_byte(to_byte(v));
    }
    return out;
}

void write_image(const std::filesystem::path& path, const Image& img)
{
    cv::Mat mat(img.height(), img.width(), CV_8UC3);
    for (int y = 0; y < img.height(); ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < img.width(); ++x) {
            // OpenCV stores BGR
            row[x] = cv::Vec3b(to_byte(img.at(y, x, 2)), to_byte(img.at(y, x, 1)), to_byte(img.at(y, x, 0)));
        }
    }
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    if (!cv::imwrite(path.string(), mat)) {
        throw std::runtime_error("failed to write image: " + path.string());
    }
}

Image read_image(const std::filesystem::path& path)
{
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) {
        throw std::runtime_error("failed to read image: " + path.string());
    }
    Image img(mat.rows, mat.cols);
    for (int y = 0; y < mat.rows; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < mat.cols; ++x) {
            img.at(y, x, 0) = from_byte(row[x][2]);
            img.at(y, x, 1) = from_byte(row[x][1]);
            img.at(y, x, 2) = from_byte(row[x][0]);
        }
    }
    return img;
}

Image hconcat(std::span<const Image> images)
{
    if (images.empty()) {
        return {};
    }
    const int h = images.front().height();
    int w = 0;
    for (const auto& im : images) {
        if (im.height() != h) {
            throw std::invalid_argument("hconcat: height mismatch");
        }
        w += im.width();
    }
    Image out(h, w);
    int offset = 0;
    for (const auto& im : images) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < im.width(); ++x) {
                for (int c = 0; c < 3; ++c) {
                    out.at(y, offset + x, c) = im.at(y, x, c);
                }
            }
        }
        offset += im.width();
    }
    return out;
}

Image vconcat(std::span<const Image> images)
{
    if (images.empty()) {
        return {};
    }
    const int w = images.front().width();
    int h = 0;
    for (const auto& im : images) {
        if (im.width() != w) {
            throw std::invalid_argument("vconcat: width mismatch");
        }
        h += im.height();
    }
    Image out(h, w);
    int offset = 0;
    for (const auto& im : images) {
        std::copy(im.data().begin(), im.data().end(),
                  out.data().begin() + static_cast<std::ptrdiff_t>(offset) * w * 3);
        offset += im.height();
    }
    return out;
}

} // namespace editaction

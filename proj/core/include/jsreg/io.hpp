#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "jsreg/geodesic.hpp"
#include "jsreg/image.hpp"
#include "jsreg/metrics.hpp"

namespace jsreg {

// IF1 layout: 16-byte header ("VKIMG001" + 8 zero bytes), little-endian u32
// width, height, channels, then channels * width * height little-endian
// float32 values, channel-major, row-major within a channel.
inline constexpr std::string_view kIf1Magic = "VKIMG001";
inline constexpr std::size_t kIf1HeaderBytes = 16 + 3 * 4;

struct If1Data {
    int width = 0;
    int height = 0;
    std::vector<std::vector<double>> planes;  // one per channel

    [[nodiscard]] int channels() const noexcept { return static_cast<int>(planes.size()); }
};

// Malformed bytes raise InvalidArgument; values are rounded to float32 on encode.
[[nodiscard]] std::string encode_if1(const If1Data& d);
[[nodiscard]] If1Data decode_if1(std::string_view bytes);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

void write_image(const std::filesystem::path& path, const Image2D& img);
[[nodiscard]] Image2D read_image(const std::filesystem::path& path);
void write_stack(const std::filesystem::path& path, const SliceStack& stack);
// Single-channel files read as a one-slice stack.
[[nodiscard]] SliceStack read_stack(const std::filesystem::path& path);
void write_field(const std::filesystem::path& path, const DisplacementField& u);
[[nodiscard]] DisplacementField read_field(const std::filesystem::path& path);

// Markers as a JSON array of [x, y] integer pairs.
[[nodiscard]] std::string format_markers(const MarkerSet& m);
[[nodiscard]] MarkerSet parse_markers(std::string_view json);
void write_markers(const std::filesystem::path& path, const MarkerSet& m);
[[nodiscard]] MarkerSet read_markers(const std::filesystem::path& path);

// Shortest decimal that round-trips; "nan" / "inf" / "-inf" for non-finite values.
[[nodiscard]] std::string format_number(double v);
// Inverse of format_number; throws InvalidArgument on trailing garbage.
[[nodiscard]] double parse_number(std::string_view s);

struct LabeledMetrics {
    int slice = 0;
    int epoch = 0;
    MetricsRow row;
};

// Header "slice,epoch,NCC,SSIM,PSNR,relSSD,NGF,Dice,F1,Jaccard,precision,recall".
[[nodiscard]] std::string format_metrics_csv(const std::vector<LabeledMetrics>& rows);
[[nodiscard]] std::vector<LabeledMetrics> parse_metrics_csv(std::string_view text);

[[nodiscard]] std::vector<std::string> split_csv_line(std::string_view line);

} // namespace jsreg

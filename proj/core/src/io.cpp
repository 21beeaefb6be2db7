#include "jsreg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "jsreg/error.hpp"

namespace jsreg {

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "IF1 requires IEEE-754 float32");

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

std::uint32_t get_u32(std::string_view b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + i])) << (8 * i);
    }
    return v;
}

} // namespace

std::string encode_if1(const If1Data& d) {
    if (d.width <= 0 || d.height <= 0 || d.planes.empty()) {
        throw InvalidArgument("IF1: width, height and channel count must be positive");
    }
    const std::size_t plane = static_cast<std::size_t>(d.width) * d.height;
    std::string out(kIf1Magic);
    out.resize(16, '\0');
    put_u32(out, static_cast<std::uint32_t>(d.width));
    put_u32(out, static_cast<std::uint32_t>(d.height));
    put_u32(out, static_cast<std::uint32_t>(d.planes.size()));
    out.reserve(out.size() + 4 * plane * d.planes.size());
    for (const auto& p : d.planes) {
        if (p.size() != plane) {
            throw DimensionMismatch(fmt::format("IF1: plane has {} values, expected {}", p.size(), plane));
        }
        for (double v : p) {
            put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

If1Data decode_if1(std::string_view b) {
    if (b.size() < kIf1HeaderBytes || b.substr(0, kIf1Magic.size()) != kIf1Magic) {
        throw InvalidArgument("IF1: missing VKIMG001 header");
    }
    for (std::size_t i = kIf1Magic.size(); i < 16; ++i) {
        if (b[i] != '\0') {
            throw InvalidArgument("IF1: non-zero header padding");
        }
    }
    If1Data d;
    const std::uint32_t w = get_u32(b, 16);
    const std::uint32_t h = get_u32(b, 20);
    const std::uint32_t c = get_u32(b, 24);
    constexpr std::uint32_t kMaxDim = 1u << 16;
    if (w == 0 || h == 0 || c == 0 || w > kMaxDim || h > kMaxDim || c > kMaxDim) {
        throw InvalidArgument(fmt::format("IF1: implausible dimensions {}x{}x{}", w, h, c));
    }
    const std::size_t plane = static_cast<std::size_t>(w) * h;
    if (b.size() != kIf1HeaderBytes + 4 * plane * c) {
        throw InvalidArgument(fmt::format("IF1: payload is {} bytes, expected {}", b.size() - kIf1HeaderBytes,
                                          4 * plane * c));
    }
    d.width = static_cast<int>(w);
    d.height = static_cast<int>(h);
    d.planes.assign(c, std::vector<double>(plane));
    std::size_t off = kIf1HeaderBytes;
    for (auto& p : d.planes) {
        for (auto& v : p) {
            v = static_cast<double>(std::bit_cast<float>(get_u32(b, off)));
            off += 4;
        }
    }
    return d;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError(fmt::format("read failed for '{}'", path.string()));
    }
    return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError(fmt::format("cannot open '{}' for writing", tmp.string()));
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            throw IoError(fmt::format("write failed for '{}'", tmp.string()));
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError(fmt::format("cannot rename onto '{}'", path.string()));
    }
}

void write_image(const std::filesystem::path& path, const Image2D& img) {
    write_file_atomic(path, encode_if1({img.width, img.height, {img.data}}));
}

Image2D read_image(const std::filesystem::path& path) {
    If1Data d = decode_if1(read_file(path));
    if (d.channels() != 1) {
        throw InvalidArgument(fmt::format("'{}': expected 1 channel, found {}", path.string(), d.channels()));
    }
    return Image2D(d.width, d.height, std::move(d.planes[0]));
}

void write_stack(const std::filesystem::path& path, const SliceStack& stack) {
    stack.validate();
    If1Data d{stack.slices[0].width, stack.slices[0].height, {}};
    for (const auto& s : stack.slices) {
        d.planes.push_back(s.data);
    }
    write_file_atomic(path, encode_if1(d));
}

SliceStack read_stack(const std::filesystem::path& path) {
    If1Data d = decode_if1(read_file(path));
    std::vector<Image2D> slices;
    for (auto& p : d.planes) {
        slices.emplace_back(d.width, d.height, std::move(p));
    }
    return SliceStack(std::move(slices));
}

void write_field(const std::filesystem::path& path, const DisplacementField& u) {
    write_file_atomic(path, encode_if1({u.width, u.height, {u.ux, u.uy}}));
}

DisplacementField read_field(const std::filesystem::path& path) {
    If1Data d = decode_if1(read_file(path));
    if (d.channels() != 2) {
        throw InvalidArgument(fmt::format("'{}': displacement field needs 2 channels, found {}", path.string(),
                                          d.channels()));
    }
    DisplacementField u(d.width, d.height);
    u.ux = std::move(d.planes[0]);
    u.uy = std::move(d.planes[1]);
    return u;
}

std::string format_markers(const MarkerSet& m) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : m.points) {
        j.push_back({p.x, p.y});
    }
    return j.dump() + "\n";
}

MarkerSet parse_markers(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument(fmt::format("markers: {}", e.what()));
    }
    if (!j.is_array() || j.empty()) {
        throw InvalidArgument("markers: expected a non-empty JSON array of [x, y] pairs");
    }
    MarkerSet m;
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            throw InvalidArgument(fmt::format("markers: bad entry {}", e.dump()));
        }
        m.points.push_back({e[0].get<int>(), e[1].get<int>()});
    }
    return m;
}

void write_markers(const std::filesystem::path& path, const MarkerSet& m) {
    write_file_atomic(path, format_markers(m));
}

MarkerSet read_markers(const std::filesystem::path& path) { return parse_markers(read_file(path)); }

std::string format_number(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (s == "inf") {
        return std::numeric_limits<double>::infinity();
    }
    if (s == "-inf") {
        return -std::numeric_limits<double>::infinity();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw InvalidArgument(fmt::format("not a number: '{}'", s));
    }
    return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

std::string format_metrics_csv(const std::vector<LabeledMetrics>& rows) {
    std::string out = "slice,epoch";
    for (auto name : kMetricColumns) {
        out += ',';
        out += name;
    }
    out += '\n';
    for (const auto& r : rows) {
        out += fmt::format("{},{}", r.slice, r.epoch);
        for (double v : metric_values(r.row)) {
            out += ',';
            out += format_number(v);
        }
        out += '\n';
    }
    return out;
}

std::vector<LabeledMetrics> parse_metrics_csv(std::string_view text) {
    std::vector<LabeledMetrics> rows;
    std::size_t pos = 0;
    bool header = true;
    int line_no = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != 2 + kMetricCount) {
            throw InvalidArgument(fmt::format("metrics CSV line {}: expected {} columns, found {}", line_no,
                                              2 + kMetricCount, cells.size()));
        }
        if (header) {
            if (cells[0] != "slice" || cells[1] != "epoch") {
                throw InvalidArgument("metrics CSV: header must start with slice,epoch");
            }
            for (std::size_t i = 0; i < kMetricCount; ++i) {
                if (cells[2 + i] != kMetricColumns[i]) {
                    throw InvalidArgument(fmt::format("metrics CSV: column {} must be {}, found {}", 3 + i,
                                                      kMetricColumns[i], cells[2 + i]));
                }
            }
            header = false;
            continue;
        }
        LabeledMetrics r;
        r.slice = static_cast<int>(parse_number(cells[0]));
        r.epoch = static_cast<int>(parse_number(cells[1]));
        std::array<double, kMetricCount> v{};
        for (std::size_t i = 0; i < kMetricCount; ++i) {
            v[i] = parse_number(cells[2 + i]);
        }
        r.row = metrics_from_values(v);
        rows.push_back(r);
    }
    if (header) {
        throw InvalidArgument("metrics CSV: missing header");
    }
    return rows;
}

} // namespace jsreg

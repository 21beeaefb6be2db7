#include "jsreg/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <limits>
#include <map>
#include <set>

#include <fmt/format.h>

#include "jsreg/error.hpp"
#include "jsreg/io.hpp"

namespace jsreg {

std::string_view mode_name(RunMode m) { return m == RunMode::Dip ? "dip" : "direct"; }

RunMode parse_mode(std::string_view s) {
    if (s == "dip") {
        return RunMode::Dip;
    }
    if (s == "direct") {
        return RunMode::Direct;
    }
    throw InvalidArgument(fmt::format("mode must be 'dip' or 'direct', got '{}'", s));
}

void JobConfig::validate() const {
    slice.energy.validate();
    slice.geodesic.validate();
    if (!(slice.roi_radius > 0.0)) {
        throw InvalidArgument("roi_radius must be > 0");
    }
    run.validate();
    preprocess.validate();
    static_cast<void>(build_pipeline(net));  // validates the network settings
    if (postprocess.open_radius < 0 || postprocess.close_radius < 0) {
        throw InvalidArgument("mask open/close radii must be >= 0");
    }
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

long long parse_int(std::string_view s) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw InvalidArgument(fmt::format("not an integer: '{}'", s));
    }
    return v;
}

int parse_i32(std::string_view s) {
    const long long v = parse_int(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw InvalidArgument(fmt::format("integer out of range: '{}'", s));
    }
    return static_cast<int>(v);
}

std::uint64_t parse_u64(std::string_view s) {
    std::uint64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw InvalidArgument(fmt::format("not an unsigned integer: '{}'", s));
    }
    return v;
}

bool parse_bool(std::string_view s) {
    if (s == "true") {
        return true;
    }
    if (s == "false") {
        return false;
    }
    throw InvalidArgument(fmt::format("expected true or false, got '{}'", s));
}

std::vector<int> parse_int_list(std::string_view s) {
    std::vector<int> out;
    if (trim(s).empty()) {
        return out;
    }
    for (const auto& cell : split_csv_line(s)) {
        out.push_back(parse_i32(trim(cell)));
    }
    return out;
}

std::string format_int_list(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) {
            out += ',';
        }
        out += std::to_string(v[i]);
    }
    return out;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : "auto"; }

std::optional<double> parse_optional(std::string_view s) {
    if (s == "auto") {
        return std::nullopt;
    }
    return parse_number(s);
}

struct Field {
    std::function<void(JobConfig&, std::string_view)> set;
    std::function<std::string(const JobConfig&)> get;
};

template <class Member>
Field real(Member m) {
    return {[m](JobConfig& c, std::string_view v) { std::invoke(m, c) = parse_number(v); },
            [m](const JobConfig& c) { return format_number(std::invoke(m, c)); }};
}

template <class Member>
Field integer(Member m) {
    return {[m](JobConfig& c, std::string_view v) { std::invoke(m, c) = parse_i32(v); },
            [m](const JobConfig& c) { return std::to_string(std::invoke(m, c)); }};
}

template <class Member>
Field boolean(Member m) {
    return {[m](JobConfig& c, std::string_view v) { std::invoke(m, c) = parse_bool(v); },
            [m](const JobConfig& c) { return std::string(std::invoke(m, c) ? "true" : "false"); }};
}

template <class Member>
Field optional_real(Member m) {
    return {[m](JobConfig& c, std::string_view v) { std::invoke(m, c) = parse_optional(v); },
            [m](const JobConfig& c) { return format_optional(std::invoke(m, c)); }};
}

using Table = std::vector<std::pair<std::string_view, Field>>;

const Table& fields() {
    static const Table table = [] {
        Table t;
        t.emplace_back("mu", real([](auto& c) -> auto& { return c.slice.energy.mu; }));
        t.emplace_back("lambda1", real([](auto& c) -> auto& { return c.slice.energy.lambda1; }));
        t.emplace_back("lambda2", real([](auto& c) -> auto& { return c.slice.energy.lambda2; }));
        t.emplace_back("beta1", real([](auto& c) -> auto& { return c.slice.energy.beta1; }));
        t.emplace_back("beta2", real([](auto& c) -> auto& { return c.slice.energy.beta2; }));
        t.emplace_back("a1", optional_real([](auto& c) -> auto& { return c.slice.fixed_means.a1; }));
        t.emplace_back("a2", optional_real([](auto& c) -> auto& { return c.slice.fixed_means.a2; }));
        t.emplace_back("c1", optional_real([](auto& c) -> auto& { return c.slice.fixed_means.c1; }));
        t.emplace_back("c2", optional_real([](auto& c) -> auto& { return c.slice.fixed_means.c2; }));
        t.emplace_back("sigma_s", real([](auto& c) -> auto& { return c.slice.energy.sigma_s; }));
        t.emplace_back("eps_abs", real([](auto& c) -> auto& { return c.slice.energy.eps_abs; }));
        t.emplace_back("beta_g", real([](auto& c) -> auto& { return c.slice.geodesic.beta_g; }));
        t.emplace_back("connectivity", integer([](auto& c) -> auto& { return c.slice.geodesic.connectivity; }));
        t.emplace_back("roi_radius", real([](auto& c) -> auto& { return c.slice.roi_radius; }));
        t.emplace_back("mode", Field{[](JobConfig& c, std::string_view v) { c.run.mode = parse_mode(v); },
                                     [](const JobConfig& c) { return std::string(mode_name(c.run.mode)); }});
        t.emplace_back("epochs", integer([](auto& c) -> auto& { return c.run.epochs; }));
        t.emplace_back("lr1", real([](auto& c) -> auto& { return c.run.lr1; }));
        t.emplace_back("lr2", real([](auto& c) -> auto& { return c.run.lr2; }));
        t.emplace_back("direct_lr_theta", real([](auto& c) -> auto& { return c.run.direct_lr_theta; }));
        t.emplace_back("direct_lr_u", real([](auto& c) -> auto& { return c.run.direct_lr_u; }));
        t.emplace_back("checkpoint_epochs",
                       Field{[](JobConfig& c, std::string_view v) { c.run.checkpoint_epochs = parse_int_list(v); },
                             [](const JobConfig& c) { return format_int_list(c.run.checkpoint_epochs); }});
        t.emplace_back("seed", Field{[](JobConfig& c, std::string_view v) { c.run.seed = parse_u64(v); },
                                     [](const JobConfig& c) { return std::to_string(c.run.seed); }});
        t.emplace_back("desk_scale", boolean([](auto& c) -> auto& { return c.net.desk_scale; }));
        t.emplace_back("base_filters", integer([](auto& c) -> auto& { return c.net.base_filters; }));
        t.emplace_back("depth", integer([](auto& c) -> auto& { return c.net.depth; }));
        t.emplace_back("dropout_rate", real([](auto& c) -> auto& { return c.net.dropout_rate; }));
        t.emplace_back("max_disp", real([](auto& c) -> auto& { return c.net.max_disp; }));
        t.emplace_back(
            "crop_rect",
            Field{[](JobConfig& c, std::string_view v) {
                      if (v == "none") {
                          c.preprocess.crop_rect.reset();
                          return;
                      }
                      const auto parts = parse_int_list(v);
                      if (parts.size() != 4) {
                          throw InvalidArgument("crop_rect must be 'none' or x0,y0,w,h");
                      }
                      c.preprocess.crop_rect = CropRect{parts[0], parts[1], parts[2], parts[3]};
                  },
                  [](const JobConfig& c) {
                      if (!c.preprocess.crop_rect) {
                          return std::string("none");
                      }
                      const auto& r = *c.preprocess.crop_rect;
                      return format_int_list({r.x0, r.y0, r.w, r.h});
                  }});
        t.emplace_back("target_width", integer([](auto& c) -> auto& { return c.preprocess.target_width; }));
        t.emplace_back("target_height", integer([](auto& c) -> auto& { return c.preprocess.target_height; }));
        t.emplace_back("clahe_tiles_x", integer([](auto& c) -> auto& { return c.preprocess.clahe_tiles_x; }));
        t.emplace_back("clahe_tiles_y", integer([](auto& c) -> auto& { return c.preprocess.clahe_tiles_y; }));
        t.emplace_back("clahe_clip", real([](auto& c) -> auto& { return c.preprocess.clahe_clip; }));
        t.emplace_back("skip_resize_low_contrast",
                       boolean([](auto& c) -> auto& { return c.preprocess.skip_resize_low_contrast; }));
        t.emplace_back("mask_open_radius", integer([](auto& c) -> auto& { return c.postprocess.open_radius; }));
        t.emplace_back("mask_close_radius", integer([](auto& c) -> auto& { return c.postprocess.close_radius; }));
        return t;
    }();
    return table;
}

} // namespace

const std::vector<std::string_view>& config_keys() {
    static const std::vector<std::string_view> keys = [] {
        std::vector<std::string_view> k;
        for (const auto& [name, f] : fields()) {
            k.push_back(name);
        }
        return k;
    }();
    return keys;
}

JobConfig parse_config(std::string_view text) { return parse_config(text, JobConfig{}); }

JobConfig parse_config(std::string_view text, JobConfig cfg) {
    const auto& table = fields();
    std::set<std::string, std::less<>> seen;
    std::size_t pos = 0;
    int line_no = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        if (trim(line).empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument(fmt::format("config line {}: expected 'key = value'", line_no));
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = std::find_if(table.begin(), table.end(), [&](const auto& e) { return e.first == key; });
        if (it == table.end()) {
            throw InvalidArgument(fmt::format("config line {}: unknown key '{}'", line_no, key));
        }
        if (!seen.insert(key).second) {
            throw InvalidArgument(fmt::format("config line {}: duplicate key '{}'", line_no, key));
        }
        try {
            it->second.set(cfg, value);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument(fmt::format("config line {} ({}): {}", line_no, key, e.what()));
        }
    }
    if (seen.contains("epochs") && !seen.contains("checkpoint_epochs")) {
        auto& cp = cfg.run.checkpoint_epochs;
        cp.erase(std::remove_if(cp.begin(), cp.end(), [&](int e) { return e > cfg.run.epochs; }), cp.end());
    }
    cfg.validate();
    return cfg;
}

std::string format_config(const JobConfig& cfg) {
    std::string out;
    for (const auto& [name, f] : fields()) {
        out += fmt::format("{} = {}\n", name, f.get(cfg));
    }
    return out;
}

} // namespace jsreg

#pragma once

// Line-oriented sample-store file:
//
//   theramon-samples 1
//   meta <key> <value>          (zero or more; value runs to end of line)
//   burn_in <n>
//   thin <n>
//   seed <n>
//   sweeps <n>
//   columns <c>
//   <name>                      (c lines)
//   rows <m>
//   <v1> <v2> ... <vc>          (m lines, shortest round-trip decimal)
//   end

#include <charconv>
#include <cstdint>
#include <map>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/graph/sample_store.hpp"
#include "theramon/io/text.hpp"

namespace theramon::io {

inline constexpr std::string_view kSamplesMagic = "theramon-samples";
inline constexpr int kSamplesVersion = 1;

inline std::string format_samples(const graph::SampleStore& s) {
    std::string out;
    out += std::string(kSamplesMagic) + ' ' + std::to_string(kSamplesVersion) + '\n';
    for (const auto& [k, v] : s.metadata()) {
        if (k.empty() || k.find_first_of(" \n\r") != std::string::npos)
            throw ContractError("metadata key '" + k + "' must be a single word");
        if (v.find_first_of("\n\r") != std::string::npos)
            throw ContractError("metadata value for '" + k + "' must be a single line");
        out += "meta " + k + ' ' + v + '\n';
    }
    out += "burn_in " + std::to_string(s.burn_in()) + '\n';
    out += "thin " + std::to_string(s.thin()) + '\n';
    out += "seed " + std::to_string(s.seed()) + '\n';
    out += "sweeps " + std::to_string(s.sweep_count()) + '\n';
    out += "columns " + std::to_string(s.columns().size()) + '\n';
    for (const auto& c : s.columns()) out += c + '\n';
    out += "rows " + std::to_string(s.size()) + '\n';
    for (const auto& r : s.rows()) out += join_doubles(r) + '\n';
    out += "end\n";
    return out;
}

namespace detail {

class LineCursor {
public:
    LineCursor(std::string_view text, std::string source) : text_(text), source_(std::move(source)) {}

    bool done() const { return pos_ >= text_.size(); }
    std::size_t offset() const { return pos_; }
    bool peek_is(std::string_view prefix) const { return text_.substr(pos_, prefix.size()) == prefix; }

    std::string_view next(const char* expecting) {
        line_start_ = pos_;
        if (done()) fail(std::string("unexpected end of file, expected ") + expecting);
        auto nl = text_.find('\n', pos_);
        if (nl == std::string_view::npos) fail(std::string("truncated line, expected ") + expecting);
        auto line = text_.substr(pos_, nl - pos_);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos_ = nl + 1;
        return line;
    }

    [[noreturn]] void fail(const std::string& what) const {
        throw ParseError(source_ + ": byte " + std::to_string(line_start_) + ": " + what);
    }

    std::uint64_t keyed(const char* key) {
        auto line = next(key);
        const std::string_view k(key);
        if (line.substr(0, k.size()) != k || line.size() <= k.size() || line[k.size()] != ' ')
            fail(std::string("expected '") + key + " <n>'");
        auto v = line.substr(k.size() + 1);
        std::uint64_t n = 0;
        auto res = std::from_chars(v.data(), v.data() + v.size(), n);
        if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) fail(std::string("bad integer for ") + key);
        return n;
    }

private:
    std::string_view text_;
    std::string source_;
    std::size_t pos_ = 0;
    std::size_t line_start_ = 0;
};

}  // namespace detail

inline graph::SampleStore parse_samples(std::string_view text, const std::string& source = "samples") {
    detail::LineCursor cur(text, source);
    {
        auto head = cur.next("header");
        const auto magic_len = kSamplesMagic.size();
        if (head.substr(0, magic_len) != kSamplesMagic || head.size() <= magic_len + 1 || head[magic_len] != ' ')
            cur.fail("not a theramon samples file");
        const auto ver = head.substr(magic_len + 1);
        if (ver != std::to_string(kSamplesVersion))
            throw VersionError(source + ": samples format version " + std::string(ver) +
                               " is not supported (expected " + std::to_string(kSamplesVersion) + ")");
    }
    std::map<std::string, std::string> meta;
    while (cur.peek_is("meta ")) {
        auto rest = cur.next("meta").substr(5);
        auto sp = rest.find(' ');
        if (sp == std::string_view::npos || sp == 0) cur.fail("meta line needs a key and a value");
        meta.emplace(std::string(rest.substr(0, sp)), std::string(rest.substr(sp + 1)));
    }
    const auto burn = cur.keyed("burn_in");
    const auto thin = cur.keyed("thin");
    const auto seed = cur.keyed("seed");
    const auto sweeps = cur.keyed("sweeps");
    const auto ncol = cur.keyed("columns");
    if (thin == 0) cur.fail("thin must be >= 1");
    std::vector<std::string> cols;
    for (std::uint64_t c = 0; c < ncol; ++c) {
        auto name = cur.next("column name");
        if (name.empty() || name.find(' ') != std::string_view::npos) cur.fail("bad column name");
        cols.emplace_back(name);
    }
    const auto nrow = cur.keyed("rows");
    graph::SampleStore s(std::move(cols), burn, thin, seed);
    for (std::uint64_t r = 0; r < nrow; ++r) {
        auto row = cur.next("sample row");
        std::vector<double> vals;
        try {
            vals = split_doubles(row, "sample row");
        } catch (const ParseError& e) {
            cur.fail(e.what());
        }
        if (vals.size() != ncol)
            cur.fail("row has " + std::to_string(vals.size()) + " values, expected " + std::to_string(ncol));
        s.append(std::move(vals));
    }
    if (cur.next("'end'") != "end") cur.fail("expected 'end'");
    s.metadata() = std::move(meta);
    s.finalize(sweeps);
    return s;
}

inline void save_samples(const graph::SampleStore& s, const std::filesystem::path& path) {
    write_file_atomic(path, format_samples(s));
}

inline graph::SampleStore load_samples(const std::filesystem::path& path) {
    return parse_samples(read_file(path), path.string());
}

}  // namespace theramon::io

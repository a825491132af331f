#pragma once

// Patient database: delimited text, one row per observation.
//
//   patient_id,cycle_index,dose_std,t0,w0,t_offset,wbc
//
// wbc and w0 are raw counts; both are stored as natural logarithms after
// ingestion. t_offset is days since the cycle's administration at t0.
// Rows may be in any order. Blank lines and lines starting with '#' are
// skipped.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "theramon/errors.hpp"
#include "theramon/io/text.hpp"
#include "theramon/model/types.hpp"

namespace theramon::io {

inline constexpr std::array<const char*, 7> kPatientDbColumns{"patient_id", "cycle_index", "dose_std", "t0",
                                                              "w0",         "t_offset",    "wbc"};

namespace detail {

inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i)
        if (i == line.size() || line[i] == ',') {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    return out;
}

struct PendingCycle {
    model::CycleObservation obs;
    std::vector<std::size_t> lines;
    std::size_t first_line = 0;
};

}  // namespace detail

/// Parses database text. `source` names the input in messages.
inline std::vector<model::PatientRecord> parse_patient_db(std::string_view text, const WarningSink& sink = {},
                                                          const std::string& source = "patient db") {
    std::vector<std::pair<std::size_t, std::string>> lines;
    {
        std::size_t n = 0, pos = 0;
        while (pos <= text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            ++n;
            auto line = trim(text.substr(pos, nl - pos));
            if (!line.empty() && line.front() != '#') lines.emplace_back(n, std::move(line));
            pos = nl + 1;
        }
    }
    if (lines.empty()) throw ParseError(source + ": missing header row");

    const auto header = detail::split_csv(lines.front().second);
    std::array<std::size_t, 7> col{};
    for (std::size_t c = 0; c < kPatientDbColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), kPatientDbColumns[c]);
        if (it == header.end())
            throw ParseError(source + ": header lacks column '" + kPatientDbColumns[c] + "'");
        col[c] = static_cast<std::size_t>(it - header.begin());
    }
    for (const auto& h : header)
        if (std::find_if(kPatientDbColumns.begin(), kPatientDbColumns.end(), [&](const char* c) { return h == c; }) ==
            kPatientDbColumns.end())
            warn(sink, source + ": ignoring unknown column '" + h + "'");

    if (lines.size() == 1) {
        warn(sink, source + ": no data rows");
        return {};
    }

    std::vector<std::string> order;
    std::map<std::string, std::map<int, detail::PendingCycle>> byp;

    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto& [lineno, line] = lines[li];
        const std::string at = source + ":" + std::to_string(lineno);
        const auto f = detail::split_csv(line);
        if (f.size() != header.size())
            throw ParseError(at + ": expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(f.size()));
        auto num = [&](std::size_t c) {
            auto v = parse_double(f[col[c]]);
            if (!v || !std::isfinite(*v))
                throw DataError(at + ": column '" + kPatientDbColumns[c] + "' is not a finite number");
            return *v;
        };
        const std::string& pid = f[col[0]];
        if (pid.empty()) throw DataError(at + ": empty patient_id");
        const double ci = num(1);
        if (ci < 1 || ci != std::floor(ci)) throw DataError(at + ": cycle_index must be a positive integer");
        const double dose = num(2), t0 = num(3), w0 = num(4), t = num(5), wbc = num(6);
        if (!(wbc > 0.0)) throw DataError(at + ": wbc must be > 0 (raw count), got " + f[col[6]]);
        if (!(w0 > 0.0)) throw DataError(at + ": w0 must be > 0 (raw count), got " + f[col[4]]);
        if (dose < 0.0) throw DataError(at + ": dose_std must be >= 0");
        if (t < 0.0) throw DataError(at + ": t_offset must be >= 0");

        auto [pit, fresh] = byp.try_emplace(pid);
        if (fresh) order.push_back(pid);
        auto [cit, new_cycle] = pit->second.try_emplace(static_cast<int>(ci));
        auto& pc = cit->second;
        if (new_cycle) {
            pc.obs.cycle_index = static_cast<int>(ci);
            pc.obs.dose_std = dose;
            pc.obs.t0 = t0;
            pc.obs.w0 = std::log(w0);
            pc.first_line = lineno;
        } else if (pc.obs.dose_std != dose || pc.obs.t0 != t0 || pc.obs.w0 != std::log(w0)) {
            throw DataError(at + ": dose_std, t0 or w0 disagrees with line " + std::to_string(pc.first_line) +
                            " for the same cycle");
        }
        pc.obs.times.push_back(t);
        pc.obs.wbc_log.push_back(std::log(wbc));
        pc.lines.push_back(lineno);
    }

    std::vector<model::PatientRecord> out;
    for (const auto& pid : order) {
        model::PatientRecord rec;
        rec.patient_id = pid;
        for (auto& [ci, pc] : byp[pid]) {
            auto& o = pc.obs;
            std::vector<std::size_t> idx(o.times.size());
            std::iota(idx.begin(), idx.end(), 0);
            if (!std::is_sorted(o.times.begin(), o.times.end())) {
                warn(sink, source + ": patient '" + pid + "' cycle " + std::to_string(ci) +
                               ": observation times out of order, sorted");
                std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return o.times[a] < o.times[b]; });
            }
            model::CycleObservation sorted = o;
            for (std::size_t k = 0; k < idx.size(); ++k) {
                sorted.times[k] = o.times[idx[k]];
                sorted.wbc_log[k] = o.wbc_log[idx[k]];
                if (k > 0 && sorted.times[k] == sorted.times[k - 1])
                    throw DataError(source + ":" + std::to_string(pc.lines[idx[k]]) + ": duplicate observation for patient '" +
                                    pid + "' cycle " + std::to_string(ci) + " at t_offset " +
                                    format_double(sorted.times[k]) + " (first at line " +
                                    std::to_string(pc.lines[idx[k - 1]]) + ")");
            }
            rec.cycles.push_back(std::move(sorted));
        }
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<model::PatientRecord> load_patient_db(const std::filesystem::path& path,
                                                         const WarningSink& sink = {}) {
    return parse_patient_db(read_file(path), sink, path.string());
}

/// Inverse of parse_patient_db up to the log/exp round trip of the counts.
inline std::string format_patient_db(const std::vector<model::PatientRecord>& db) {
    std::string out = "patient_id,cycle_index,dose_std,t0,w0,t_offset,wbc\n";
    for (const auto& r : db)
        for (const auto& c : r.cycles)
            for (std::size_t k = 0; k < c.size(); ++k) {
                out += r.patient_id + ',' + std::to_string(c.cycle_index) + ',' + format_double(c.dose_std) + ',' +
                       format_double(c.t0) + ',' + format_double(std::exp(c.w0)) + ',' + format_double(c.times[k]) +
                       ',' + format_double(std::exp(c.wbc_log[k])) + '\n';
            }
    return out;
}

inline void save_patient_db(const std::vector<model::PatientRecord>& db, const std::filesystem::path& path) {
    write_file_atomic(path, format_patient_db(db));
}

}  // namespace theramon::io

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "theramon/errors.hpp"

namespace theramon::graph {

/// Retained posterior draws. Each row is one retained sweep; columns are the
/// scalar components of the monitored nodes ("id" for scalar nodes,
/// "id.1" ... "id.d" for vector nodes).
///
/// Invariant: size() == floor((sweep_count - burn_in) / thin) once
/// finalized, or 0 when sweep_count <= burn_in.
class SampleStore {
public:
    SampleStore() = default;

    SampleStore(std::vector<std::string> columns, std::size_t burn_in, std::size_t thin, std::uint64_t seed)
        : columns_(std::move(columns)), burn_in_(burn_in), thin_(thin), seed_(seed) {
        if (thin_ == 0) throw ConfigError("thin must be >= 1");
    }

    void append(std::vector<double> row) {
        if (finalized_) throw ContractError("sample store is finalized");
        if (row.size() != columns_.size()) throw ContractError("row width does not match column count");
        rows_.push_back(std::move(row));
    }

    void finalize(std::size_t sweep_count) {
        if (finalized_) throw ContractError("sample store is already finalized");
        sweep_count_ = sweep_count;
        finalized_ = true;
    }

    static std::size_t retained_count(std::size_t sweeps, std::size_t burn_in, std::size_t thin) {
        return sweeps > burn_in ? (sweeps - burn_in) / thin : 0;
    }

    bool finalized() const { return finalized_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }
    const std::vector<std::string>& columns() const { return columns_; }
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    const std::vector<double>& row(std::size_t r) const { return rows_.at(r); }
    std::size_t burn_in() const { return burn_in_; }
    std::size_t thin() const { return thin_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t sweep_count() const { return sweep_count_; }

    std::size_t column_index(const std::string& name) const {
        auto it = std::find(columns_.begin(), columns_.end(), name);
        if (it == columns_.end()) throw ContractError("sample store has no column '" + name + "'");
        return static_cast<std::size_t>(it - columns_.begin());
    }

    bool has_column(const std::string& name) const {
        return std::find(columns_.begin(), columns_.end(), name) != columns_.end();
    }

    std::vector<double> column(const std::string& name) const {
        const auto c = column_index(name);
        std::vector<double> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(r[c]);
        return out;
    }

    /// Provenance (database digest, chain settings, model constants) as
    /// free-form key/value pairs.
    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    std::string meta(const std::string& key, const std::string& fallback = {}) const {
        auto it = metadata_.find(key);
        return it == metadata_.end() ? fallback : it->second;
    }

    bool operator==(const SampleStore&) const = default;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
    std::size_t burn_in_ = 0;
    std::size_t thin_ = 1;
    std::uint64_t seed_ = 0;
    std::size_t sweep_count_ = 0;
    bool finalized_ = false;
    std::map<std::string, std::string> metadata_;
};

}  // namespace theramon::graph

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rydmap/constants.hpp"
#include "rydmap/errors.hpp"

namespace rydmap {

/// Quantum numbers of a single-electron Rydberg level |n l j m_j>.
/// Half-integer momenta are stored doubled (j2 = 2j, mj2 = 2 m_j).
struct AtomicState {
    int n = 1;
    int l = 0;
    int j2 = 1;
    int mj2 = 1;

    double j() const { return 0.5 * j2; }
    double mj() const { return 0.5 * mj2; }

    auto operator<=>(const AtomicState&) const = default;

    /// Validating constructor from physical (undoubled) values.
    static AtomicState make(int n, int l, double j, double mj) {
        AtomicState s{n, l, static_cast<int>(std::lround(2 * j)), static_cast<int>(std::lround(2 * mj))};
        if (std::abs(2 * j - s.j2) > 1e-9 || std::abs(2 * mj - s.mj2) > 1e-9)
            throw ConfigError("j and m_j must be half-integers");
        s.validate();
        return s;
    }

    void validate() const {
        if (n < 1) throw ConfigError("n must be >= 1, got " + std::to_string(n));
        if (l < 0 || l >= n) throw ConfigError("l must satisfy 0 <= l < n");
        if (j2 != 2 * l + 1 && j2 != 2 * l - 1) throw ConfigError("j must be l +- 1/2");
        if (j2 < 1) throw ConfigError("j must be positive");
        if (std::abs(mj2) > j2 || (mj2 - j2) % 2 != 0) throw ConfigError("|m_j| must not exceed j");
    }

    std::string label() const {
        static constexpr const char* letters = "SPDFGHIKLMNOQRTUV";
        std::ostringstream os;
        os << n;
        if (l < 17)
            os << letters[l];
        else
            os << "[l=" << l << "]";
        os << j2 << "/2,mj=" << mj2 << "/2";
        return os.str();
    }
};

/// Rydberg-Ritz quantum defect expansion for one (l, j) channel.
struct QuantumDefectChannel {
    int l = 0;
    int j2 = 1;
    double delta0 = 0.0;
    double delta2 = 0.0;
    double delta4 = 0.0;
    int valid_n_min = 1;
    std::string source_citation;

    double defect(int n) const {
        const double x = n - delta0;
        const double x2 = x * x;
        return delta0 + delta2 / x2 + delta4 / (x2 * x2);
    }
};

/// Quantum defect table for one species, plus the species' reduced-mass
/// Rydberg constant.
class DefectTable {
public:
    DefectTable() = default;

    DefectTable(std::string species, double rydberg_ghz, std::vector<QuantumDefectChannel> channels)
        : species_(std::move(species)), rydberg_ghz_(rydberg_ghz) {
        for (auto& c : channels) add(std::move(c));
    }

    /// Zero defects for every channel and the infinite-mass Rydberg constant.
    static DefectTable hydrogenic(int l_max = 200) {
        DefectTable t;
        t.species_ = "hydrogenic";
        t.rydberg_ghz_ = constants::rydberg_inf_ghz;
        t.version_ = "builtin";
        t.default_to_zero_ = true;
        t.l_max_ = l_max;
        return t;
    }

    void add(QuantumDefectChannel c) {
        const auto key = std::pair{c.l, c.j2};
        channels_[key] = std::move(c);
    }

    QuantumDefectChannel channel(int l, int j2) const {
        if (auto it = channels_.find({l, j2}); it != channels_.end()) return it->second;
        if ((default_to_zero_ && l <= l_max_) || (high_l_zero_ && l > max_tabulated_l()))
            return QuantumDefectChannel{l, j2, 0, 0, 0, 1, "hydrogenic"};
        throw DataError("no quantum defect data for channel l=" + std::to_string(l) + ", j=" +
                        std::to_string(j2) + "/2 in species '" + species_ + "'");
    }

    bool has_channel(int l, int j2) const {
        if (channels_.count({l, j2})) return true;
        return (default_to_zero_ && l <= l_max_) || (high_l_zero_ && l > max_tabulated_l());
    }

    int max_tabulated_l() const {
        int m = -1;
        for (const auto& [k, c] : channels_) m = std::max(m, k.first);
        return m;
    }

    const std::string& species() const { return species_; }
    double rydberg_ghz() const { return rydberg_ghz_; }
    const std::string& version() const { return version_; }
    const std::string& source() const { return source_; }
    bool high_l_zero() const { return high_l_zero_; }

    /// Parse the structured data file. Unknown keys are rejected.
    static DefectTable from_json(const nlohmann::json& doc) {
        using nlohmann::json;
        static const std::vector<std::string> top_keys{"schema_version", "species", "mass_u", "version",
                                                       "source", "high_l_hydrogenic", "channels"};
        static const std::vector<std::string> channel_keys{"l",      "j",           "delta0",         "delta2",
                                                           "delta4", "valid_n_min", "source_citation"};
        auto reject_unknown = [](const json& obj, const std::vector<std::string>& allowed, const std::string& where) {
            for (const auto& [k, v] : obj.items()) {
                if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
                    throw DataError("unknown field '" + k + "' in " + where);
            }
        };
        if (!doc.is_object()) throw DataError("quantum defect file: top level must be an object");
        reject_unknown(doc, top_keys, "quantum defect file");
        try {
            DefectTable t;
            t.species_ = doc.at("species").get<std::string>();
            t.rydberg_ghz_ = constants::rydberg_ghz(doc.at("mass_u").get<double>());
            t.version_ = doc.value("version", std::string{"unversioned"});
            t.source_ = doc.value("source", std::string{});
            t.high_l_zero_ = doc.value("high_l_hydrogenic", false);
            for (const auto& c : doc.at("channels")) {
                reject_unknown(c, channel_keys, "channel record");
                QuantumDefectChannel ch;
                ch.l = c.at("l").get<int>();
                const double j = c.at("j").get<double>();
                ch.j2 = static_cast<int>(std::lround(2 * j));
                ch.delta0 = c.at("delta0").get<double>();
                ch.delta2 = c.value("delta2", 0.0);
                ch.delta4 = c.value("delta4", 0.0);
                ch.valid_n_min = c.at("valid_n_min").get<int>();
                ch.source_citation = c.at("source_citation").get<std::string>();
                if (ch.j2 != 2 * ch.l + 1 && ch.j2 != 2 * ch.l - 1)
                    throw DataError("channel l=" + std::to_string(ch.l) + " has inconsistent j");
                t.add(std::move(ch));
            }
            return t;
        } catch (const json::exception& e) {
            throw DataError(std::string("quantum defect file: ") + e.what());
        }
    }

    static DefectTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open quantum defect file '" + path + "'");
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::parse_error& e) {
            throw DataError("quantum defect file '" + path + "': " + e.what());
        }
        return from_json(doc);
    }

private:
    std::string species_;
    double rydberg_ghz_ = constants::rydberg_inf_ghz;
    std::string version_;
    std::string source_;
    bool default_to_zero_ = false;
    bool high_l_zero_ = false;
    int l_max_ = 0;
    std::map<std::pair<int, int>, QuantumDefectChannel> channels_;
};

/// Static fields, both along the quantization axis z.
struct FieldConfig {
    double b_gauss = 0.0;
    double e_mv_cm = 0.0;

    auto operator<=>(const FieldConfig&) const = default;
};

}  // namespace rydmap

#pragma once

#include "pdmp/point_measure.hpp"
#include "pdmp/simulate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmp {

/// A point measure serializes as an array of [location..., multiplicity]
/// records; the multiplicity is the last element of each record.
inline nlohmann::json measure_to_json(const PointMeasure& measure) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& a : measure.atoms()) {
        nlohmann::json rec = nlohmann::json::array();
        for (double c : a.location) rec.push_back(c);
        rec.push_back(a.multiplicity);
        out.push_back(std::move(rec));
    }
    return out;
}

inline PointMeasure measure_from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw std::invalid_argument("measure: expected an array of records");
    }
    std::vector<Atom> atoms;
    atoms.reserve(j.size());
    for (const auto& rec : j) {
        if (!rec.is_array() || rec.size() < 2) {
            throw std::invalid_argument(
                "measure: each record is [location..., multiplicity]");
        }
        Atom a;
        for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
            a.location.push_back(rec[i].get<double>());
        }
        a.multiplicity = rec.back().get<std::int64_t>();
        atoms.push_back(std::move(a));
    }
    return PointMeasure(std::move(atoms));
}

inline nlohmann::json state_to_json(const HybridState& x) {
    return nlohmann::json{{"mode", x.mode},
                          {"measure", measure_to_json(x.measure)}};
}

inline HybridState state_from_json(const nlohmann::json& j) {
    HybridState x;
    x.mode = j.at("mode").get<int>();
    x.measure = measure_from_json(j.at("measure"));
    return x;
}

/// Trajectory as {initial, jumps: [{s, z}], truncated, horizon}; an infinite
/// horizon serializes as null.
inline nlohmann::json trajectory_to_json(const Trajectory& traj) {
    nlohmann::json jumps = nlohmann::json::array();
    for (const auto& jump : traj.jumps) {
        jumps.push_back(
            {{"s", jump.s}, {"z", state_to_json(jump.z)}});
    }
    nlohmann::json out{{"initial", state_to_json(traj.initial)},
                       {"jumps", std::move(jumps)},
                       {"truncated", traj.truncated}};
    if (std::isfinite(traj.horizon)) {
        out["horizon"] = traj.horizon;
    } else {
        out["horizon"] = nullptr;
    }
    return out;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// CSV rows (n, T_n, atom list) for plotting; atoms are space-separated
/// coordinates followed by xMULT, atoms joined with ';'.
inline void trajectory_to_csv(std::ostream& os, const Trajectory& traj) {
    os << "n,t_n,atoms\n";
    const auto emit = [&os](std::size_t n, double t, const HybridState& x) {
        os << n << ',' << detail::format_double(t) << ',';
        bool first_atom = true;
        for (const auto& a : x.measure.atoms()) {
            if (!first_atom) os << ';';
            first_atom = false;
            for (std::size_t i = 0; i < a.location.size(); ++i) {
                if (i > 0) os << ' ';
                os << detail::format_double(a.location[i]);
            }
            os << " x" << a.multiplicity;
        }
        os << '\n';
    };
    emit(0, 0.0, traj.initial);
    double t = 0.0;
    for (std::size_t i = 0; i < traj.jumps.size(); ++i) {
        t += traj.jumps[i].s;
        emit(i + 1, t, traj.jumps[i].z);
    }
}

} // namespace pdmp

#ifndef DTREG_METRICS_TYPES_HPP
#define DTREG_METRICS_TYPES_HPP

#include <string>
#include <vector>

#include "dtreg/core.hpp"

namespace dtreg {

struct Landmark {
    std::string id;
    Vec3 position; // world mm
};

struct LandmarkSet {
    std::vector<Landmark> entries;

    const Landmark* find(const std::string& id) const {
        for (const auto& e : entries)
            if (e.id == id) return &e;
        return nullptr;
    }
};

} // namespace dtreg

#endif

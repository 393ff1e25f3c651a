#include "fsgc/types.hpp"

#include <cmath>

namespace fsgc {

VariableKind VariableKind::ordinal(int levels) {
    if (levels < 3) throw Error("ordinal kind requires at least 3 levels");
    return {Kind::ordinal, levels};
}

int VariableKind::cutoff_count() const {
    switch (tag) {
        case Kind::binary: return 1;
        case Kind::ordinal: return levels - 1;
        case Kind::truncated: return 1;
        case Kind::continuous: return 0;
    }
    return 0;
}

void VariableKind::validate_value(double x) const {
    if (std::isnan(x)) return;  // missing
    switch (tag) {
        case Kind::binary:
            if (x != 0.0 && x != 1.0) throw Error("binary value must be 0 or 1");
            break;
        case Kind::ordinal:
            if (x != std::floor(x) || x < 0.0 || x > levels - 1) {
                throw Error("ordinal value must be an integer in [0, levels-1]");
            }
            break;
        case Kind::truncated:
            if (x < 0.0) throw Error("truncated value must be nonnegative");
            break;
        case Kind::continuous:
            if (!std::isfinite(x)) throw Error("continuous value must be finite");
            break;
    }
}

std::string VariableKind::name() const {
    switch (tag) {
        case Kind::binary: return "binary";
        case Kind::ordinal: return "ordinal";
        case Kind::truncated: return "truncated";
        case Kind::continuous: return "continuous";
    }
    return "unknown";
}

VariableKind kind_from_name(const std::string& name, int levels) {
    if (name == "binary") return VariableKind::binary();
    if (name == "ordinal") return VariableKind::ordinal(levels);
    if (name == "truncated") return VariableKind::truncated();
    if (name == "continuous") return VariableKind::continuous();
    throw Error("unknown variable kind: " + name);
}

}  // namespace fsgc

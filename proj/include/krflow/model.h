#pragma once
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace krflow {

using IMat = std::array<std::array<int, 2>, 2>;  // n=1 uses the (0,0) entry

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Symmetry-reduced Fano preset: moment polytope lattice points plus the
// finite symmetry group acting on them.
struct ReducedModel {
    std::string name;
    int n = 1;
    std::vector<std::array<int, 2>> points;  // second coord 0 when n=1
    double volume = 0.0;
    std::vector<IMat> sym_generators;
    bool ke_expected = false;

    // full group closure of the generators (always contains identity)
    std::vector<IMat> symmetry_group() const;
    // subgroup of signed permutation matrices; these act exactly on the
    // grid box and are the ones used for the discrete projection
    std::vector<IMat> box_symmetry_group() const;
};

// area (n=2) or length (n=1) of the convex hull of the lattice points
double hull_volume(const ReducedModel& m);

// registry
std::vector<std::string> preset_names();
ReducedModel build_model(const std::string& preset_name);

// text manifest: blocks "preset <name> / n <dim> / point <ints> /
// volume <v> / sym <row-major ints> / ke <bool> / end"
std::vector<ReducedModel> parse_manifest(const std::string& text);
const std::string& default_manifest();

}  // namespace krflow

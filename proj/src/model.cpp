#include "krflow/model.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace krflow {

namespace {

IMat mat_mul(const IMat& a, const IMat& b) {
    IMat c{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return c;
}

std::array<int, 4> key_of(const IMat& m) {
    return {m[0][0], m[0][1], m[1][0], m[1][1]};
}

}  // namespace

std::vector<IMat> ReducedModel::symmetry_group() const {
    IMat id{{{1, 0}, {0, 1}}};
    std::set<std::array<int, 4>> seen{key_of(id)};
    std::vector<IMat> group{id};
    std::vector<IMat> frontier{id};
    while (!frontier.empty()) {
        IMat g = frontier.back();
        frontier.pop_back();
        for (const IMat& s : sym_generators) {
            IMat h = mat_mul(s, g);
            if (seen.insert(key_of(h)).second) {
                group.push_back(h);
                frontier.push_back(h);
            }
        }
        if (group.size() > 256)
            throw ConfigError("symmetry group closure did not terminate");
    }
    return group;
}

std::vector<IMat> ReducedModel::box_symmetry_group() const {
    std::vector<IMat> out;
    for (const IMat& g : symmetry_group()) {
        int nz = 0;
        bool ok = true;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                int a = std::abs(g[i][j]);
                if (a > 1) ok = false;
                nz += (a != 0);
            }
        // rows and columns each hold exactly one +-1
        if (ok && nz == 2 &&
            std::abs(g[0][0]) + std::abs(g[0][1]) == 1 &&
            std::abs(g[0][0]) + std::abs(g[1][0]) == 1)
            out.push_back(g);
    }
    return out;
}

double hull_volume(const ReducedModel& m) {
    if (m.n == 1) {
        int lo = m.points[0][0], hi = lo;
        for (auto& p : m.points) {
            lo = std::min(lo, p[0]);
            hi = std::max(hi, p[0]);
        }
        return double(hi - lo);
    }
    // Andrew monotone chain, then shoelace
    auto pts = m.points;
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    auto cross = [](const std::array<int, 2>& o, const std::array<int, 2>& a,
                    const std::array<int, 2>& b) {
        return (long)(a[0] - o[0]) * (b[1] - o[1]) -
               (long)(a[1] - o[1]) * (b[0] - o[0]);
    };
    std::vector<std::array<int, 2>> hull(2 * pts.size());
    size_t k = 0;
    for (size_t i = 0; i < pts.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    for (size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k > 0 ? k - 1 : 0);
    long twice = 0;
    for (size_t i = 0; i < hull.size(); ++i) {
        auto& a = hull[i];
        auto& b = hull[(i + 1) % hull.size()];
        twice += (long)a[0] * b[1] - (long)a[1] * b[0];
    }
    return std::abs(twice) / 2.0;
}

const std::string& default_manifest() {
    static const std::string text = R"(# preset registry
preset cp1
n 1
point -1
point 0
point 1
volume 2
sym -1
ke true
end

preset p1xp1
n 2
point -1 -1
point -1 0
point -1 1
point 0 -1
point 0 0
point 0 1
point 1 -1
point 1 0
point 1 1
volume 4
sym 0 1 1 0
sym -1 0 0 1
ke true
end

preset cp2
n 2
point -1 -1
point -1 0
point -1 1
point -1 2
point 0 -1
point 0 0
point 0 1
point 1 -1
point 1 0
point 2 -1
volume 4.5
sym -1 -1 1 0
sym 0 1 1 0
ke true
end

preset blowup1
n 2
point -1 0
point -1 1
point -1 2
point 0 -1
point 0 0
point 0 1
point 1 -1
point 1 0
point 2 -1
volume 4
sym 0 1 1 0
ke false
end

preset blowup2
n 2
point -1 0
point -1 1
point -1 2
point 0 -1
point 0 0
point 0 1
point 1 -1
point 1 0
volume 3.5
sym -1 -1 0 1
ke false
end

preset blowup3
n 2
point -1 0
point -1 1
point 0 -1
point 0 0
point 0 1
point 1 -1
point 1 0
volume 3
sym 0 -1 -1 0
sym -1 -1 0 1
sym -1 0 0 -1
ke true
end
)";
    return text;
}

std::vector<ReducedModel> parse_manifest(const std::string& text) {
    std::vector<ReducedModel> models;
    std::istringstream in(text);
    std::string line;
    ReducedModel cur;
    bool open = false;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw ConfigError("manifest line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string kw;
        if (!(ls >> kw)) continue;
        if (kw == "preset") {
            if (open) fail("nested preset block");
            cur = ReducedModel{};
            if (!(ls >> cur.name)) fail("preset needs a name");
            open = true;
        } else if (!open) {
            fail("'" + kw + "' outside a preset block");
        } else if (kw == "n") {
            if (!(ls >> cur.n) || (cur.n != 1 && cur.n != 2))
                fail("n must be 1 or 2");
        } else if (kw == "point") {
            std::array<int, 2> p{0, 0};
            if (!(ls >> p[0])) fail("point needs coordinates");
            if (cur.n == 2 && !(ls >> p[1])) fail("point needs 2 coordinates");
            cur.points.push_back(p);
        } else if (kw == "volume") {
            if (!(ls >> cur.volume)) fail("bad volume");
        } else if (kw == "sym") {
            IMat g{{{1, 0}, {0, 1}}};
            if (!(ls >> g[0][0])) fail("bad sym matrix");
            if (cur.n == 2 &&
                !(ls >> g[0][1] >> g[1][0] >> g[1][1]))
                fail("sym needs 4 entries for n=2");
            cur.sym_generators.push_back(g);
        } else if (kw == "ke") {
            std::string v;
            ls >> v;
            cur.ke_expected = (v == "true" || v == "1");
        } else if (kw == "end") {
            if (cur.points.empty()) fail("preset has no points");
            if (hull_volume(cur) <= 0.0)
                fail("points do not affinely span the plane");
            if (std::abs(hull_volume(cur) - cur.volume) > 1e-12)
                fail("volume does not match the hull of the points");
            for (const IMat& g : cur.sym_generators)
                for (auto& p : cur.points) {
                    std::array<int, 2> q{
                        g[0][0] * p[0] + g[0][1] * p[1],
                        g[1][0] * p[0] + g[1][1] * p[1]};
                    if (std::find(cur.points.begin(), cur.points.end(), q) ==
                        cur.points.end())
                        fail("symmetry generator does not preserve the points");
                }
            models.push_back(cur);
            open = false;
        } else {
            fail("unknown keyword '" + kw + "'");
        }
    }
    if (open) fail("unterminated preset block");
    return models;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (auto& m : parse_manifest(default_manifest())) names.push_back(m.name);
    return names;
}

ReducedModel build_model(const std::string& preset_name) {
    for (auto& m : parse_manifest(default_manifest()))
        if (m.name == preset_name) return m;
    throw ConfigError("unknown preset '" + preset_name + "'");
}

}  // namespace krflow

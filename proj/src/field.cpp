#include "krflow/field.h"

#include <algorithm>
#include <cmath>

namespace krflow {

namespace fd {

namespace {

struct Lines {
    int count, len;
    std::size_t base_stride, elem_stride;
};

// axis 0 varies slowest in the flattened layout
Lines lines_for(int n, int N, int axis) {
    if (n == 1) return {1, N, 0, 1};
    if (axis == 0) return {N, N, 1, (std::size_t)N};
    return {N, N, (std::size_t)N, 1};
}

}  // namespace

void d2(const std::vector<double>& u, std::vector<double>& out, int n, int N,
        double h, int axis, int order) {
    out.resize(u.size());
    Lines ln = lines_for(n, N, axis);
    const double ih2 = 1.0 / (h * h);
    std::vector<double> d(N - 1), s(N);
    for (int l = 0; l < ln.count; ++l) {
        const double* p = u.data() + l * ln.base_stride;
        double* o = out.data() + l * ln.base_stride;
        for (int i = 0; i < N - 1; ++i)
            d[i] = p[(i + 1) * ln.elem_stride] - p[i * ln.elem_stride];
        s[0] = 2 * d[0];
        s[N - 1] = -2 * d[N - 2];
        for (int i = 1; i < N - 1; ++i) s[i] = d[i] - d[i - 1];
        if (order == 4) {
            o[0] = s[0] * ih2;
            o[ln.elem_stride] = s[1] * ih2;
            o[(std::size_t)(N - 2) * ln.elem_stride] = s[N - 2] * ih2;
            o[(std::size_t)(N - 1) * ln.elem_stride] = s[N - 1] * ih2;
            for (int i = 2; i < N - 2; ++i) {
                double d4 = (s[i - 1] - s[i]) + (s[i + 1] - s[i]);
                o[(std::size_t)i * ln.elem_stride] = (s[i] - d4 / 12) * ih2;
            }
        } else {
            for (int i = 0; i < N; ++i)
                o[(std::size_t)i * ln.elem_stride] = s[i] * ih2;
        }
    }
}

void d1(const std::vector<double>& u, std::vector<double>& out, int n, int N,
        double h, int axis, int order) {
    out.resize(u.size());
    Lines ln = lines_for(n, N, axis);
    const double ih = 1.0 / h;
    for (int l = 0; l < ln.count; ++l) {
        const double* p = u.data() + l * ln.base_stride;
        double* o = out.data() + l * ln.base_stride;
        auto at = [&](int i) { return p[(std::size_t)i * ln.elem_stride]; };
        o[0] = 0.0;
        o[(std::size_t)(N - 1) * ln.elem_stride] = 0.0;
        int lo = 1, hi = N - 2;
        if (order == 4) {
            o[ln.elem_stride] = 0.5 * (at(2) - at(0)) * ih;
            o[(std::size_t)(N - 2) * ln.elem_stride] =
                0.5 * (at(N - 1) - at(N - 3)) * ih;
            lo = 2;
            hi = N - 3;
            for (int i = lo; i <= hi; ++i)
                o[(std::size_t)i * ln.elem_stride] =
                    (8 * (at(i + 1) - at(i - 1)) - (at(i + 2) - at(i - 2))) *
                    ih / 12;
        } else {
            for (int i = lo; i <= hi; ++i)
                o[(std::size_t)i * ln.elem_stride] =
                    0.5 * (at(i + 1) - at(i - 1)) * ih;
        }
    }
}

void d2_onesided(const std::vector<double>& u, std::vector<double>& out, int n,
                 int N, double h, int axis) {
    out.resize(u.size());
    Lines ln = lines_for(n, N, axis);
    const double ih2 = 1.0 / (h * h);
    std::vector<double> d(N - 1), t(N);
    for (int l = 0; l < ln.count; ++l) {
        const double* p = u.data() + l * ln.base_stride;
        double* o = out.data() + l * ln.base_stride;
        for (int i = 0; i < N - 1; ++i)
            d[i] = p[(i + 1) * ln.elem_stride] - p[i * ln.elem_stride];
        for (int i = 1; i < N - 1; ++i) t[i] = d[i] - d[i - 1];
        auto put = [&](int i, double v) {
            o[(std::size_t)i * ln.elem_stride] = v * ih2;
        };
        put(1, t[1]);
        put(N - 2, t[N - 2]);
        put(0, (35 * t[1] - 34 * t[2] + 11 * t[3]) / 12);
        put(N - 1, (35 * t[N - 2] - 34 * t[N - 3] + 11 * t[N - 4]) / 12);
        for (int i = 2; i < N - 2; ++i) {
            double d4 = (t[i - 1] - t[i]) + (t[i + 1] - t[i]);
            put(i, t[i] - d4 / 12);
        }
    }
}

void d1_onesided(const std::vector<double>& u, std::vector<double>& out, int n,
                 int N, double h, int axis) {
    out.resize(u.size());
    Lines ln = lines_for(n, N, axis);
    const double ih = 1.0 / h;
    for (int l = 0; l < ln.count; ++l) {
        const double* p = u.data() + l * ln.base_stride;
        double* o = out.data() + l * ln.base_stride;
        auto at = [&](int i) { return p[(std::size_t)i * ln.elem_stride]; };
        auto put = [&](int i, double v) {
            o[(std::size_t)i * ln.elem_stride] = v * ih;
        };
        put(1, 0.5 * (at(2) - at(0)));
        put(N - 2, 0.5 * (at(N - 1) - at(N - 3)));
        double d0 = at(1) - at(0), d1v = at(2) - at(1);
        put(0, d0 - (d1v - d0) / 2);
        double dm = at(N - 1) - at(N - 2), dm1 = at(N - 2) - at(N - 3);
        put(N - 1, dm + (dm - dm1) / 2);
        for (int i = 2; i < N - 2; ++i)
            put(i, (8 * (at(i + 1) - at(i - 1)) - (at(i + 2) - at(i - 2))) / 12);
    }
}

}  // namespace fd

int default_order(int n) { return n == 2 ? 4 : 2; }

PotentialField::PotentialField(const ReferenceData& r, std::vector<double> values,
                               int ord)
    : ref(&r), order(ord ? ord : default_order(r.grid.n)), phi(std::move(values)) {
    const Grid& g = r.grid;
    const int N = g.N;
    const std::size_t M = g.size();
    if (phi.size() != M) throw ConfigError("potential size does not match grid");
    for (double v : phi)
        if (!std::isfinite(v)) throw AdmissibilityError("non-finite potential value");

    std::vector<double> raw(M);
    if (g.n == 1) {
        fd::d2(phi, p11, 1, N, g.h, 0, order);
        fd::d1(phi, gx, 1, N, g.h, 0, order);
        for (std::size_t i = 0; i < M; ++i) raw[i] = r.a11[i] + p11[i];
    } else {
        fd::d2(phi, p11, 2, N, g.h, 0, order);
        fd::d2(phi, p22, 2, N, g.h, 1, order);
        std::vector<double> tmp;
        fd::d1(phi, tmp, 2, N, g.h, 0, order);
        fd::d1(tmp, p12, 2, N, g.h, 1, order);
        fd::d1(phi, gx, 2, N, g.h, 0, order);
        fd::d1(phi, gy, 2, N, g.h, 1, order);
        for (std::size_t i = 0; i < M; ++i) {
            // det0 + 2 MD(H0, D2phi) + det(D2phi): no large-|x| cancellation
            double md = 0.5 * (r.a11[i] * p22[i] + r.a22[i] * p11[i] -
                               2 * r.a12[i] * p12[i]);
            raw[i] = r.det0[i] + (2 * md + (p11[i] * p22[i] - p12[i] * p12[i]));
        }
    }

    detH.resize(M);
    raw_ok = true;
    min_ratio = 1e300;
    const double rlo = std::exp(-6.0), rhi = std::exp(6.0);
    for (std::size_t i = 0; i < M; ++i) {
        double ratio = raw[i] / r.det0[i];
        // far-field clamp: below double resolution the MA ratio is FD noise;
        // bounding it keeps logs finite while the stiff implicit coupling
        // still slaves the tail to the resolved region
        double cl = ratio < rlo ? rlo : (ratio > rhi ? rhi : ratio);
        detH[i] = cl * r.det0[i];
        if (!r.tail[i]) {
            if (ratio < min_ratio) {
                min_ratio = ratio;
                worst_node = i;
            }
            if (!(ratio > 0)) raw_ok = false;
        }
    }
}

PotentialField hessian_field(const ReferenceData& ref, std::vector<double> phi,
                             int order) {
    PotentialField f(ref, std::move(phi), order);
    if (!f.admissible())
        throw AdmissibilityError(
            "metric lost positivity at node " + std::to_string(f.worst_node) +
            " (detH/det0 = " + std::to_string(f.min_ratio) + ")");
    return f;
}

std::vector<double> ma_ratio(const PotentialField& f) {
    std::vector<double> r(f.detH.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f.detH[i] / f.ref->det0[i];
    return r;
}

double c_phi(const ReferenceData& ref, const std::vector<double>& phi) {
    const std::size_t M = phi.size();
    double amin = 1e300;
    for (std::size_t i = 0; i < M; ++i)
        amin = std::min(amin, ref.F0[i] + phi[i]);
    std::vector<double> terms(M);
    for (std::size_t i = 0; i < M; ++i)
        terms[i] = ref.w[i] * std::exp(-(ref.F0[i] + phi[i] - amin));
    double q = pairwise_sum(terms);
    return std::log(ref.V) + amin - std::log(q);
}

std::pair<std::vector<double>, double> ricci_potential(const PotentialField& f) {
    const ReferenceData& ref = *f.ref;
    double c = c_phi(ref, f.phi);
    std::vector<double> h(f.phi.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = -std::log(f.detH[i]) - (ref.F0[i] + f.phi[i]) + c;
    return {std::move(h), c};
}

std::vector<double> flow_rhs(const PotentialField& f) {
    const ReferenceData& ref = *f.ref;
    std::vector<double> r(f.phi.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = std::log(f.detH[i] / ref.det0[i]) + f.phi[i] - ref.h_ref[i];
    return r;
}

std::vector<double> grad_norm_sq(const std::vector<double>& f,
                                 const PotentialField& fld) {
    const ReferenceData& ref = *fld.ref;
    const Grid& g = ref.grid;
    std::vector<double> out(f.size());
    if (g.n == 1) {
        std::vector<double> fx;
        fd::d1(f, fx, 1, g.N, g.h, 0, fld.order);
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = fx[i] * fx[i] / fld.detH[i];
    } else {
        std::vector<double> fx, fy;
        fd::d1(f, fx, 2, g.N, g.h, 0, fld.order);
        fd::d1(f, fy, 2, g.N, g.h, 1, fld.order);
        for (std::size_t i = 0; i < f.size(); ++i)
            out[i] = (fx[i] * fx[i] * fld.H22(i) + fy[i] * fy[i] * fld.H11(i) -
                      2 * fx[i] * fy[i] * fld.H12(i)) /
                     fld.detH[i];
    }
    return out;
}

double boundary_mean(const ReferenceData& ref, const std::vector<double>& phi) {
    const int N = ref.grid.N;
    if (ref.grid.n == 1) return 0.5 * (phi[0] + phi[N - 1]);
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int k = 0; k < N; ++k) {
        s0 += phi[k];
        s1 += phi[(std::size_t)(N - 1) * N + k];
        s2 += phi[(std::size_t)k * N];
        s3 += phi[(std::size_t)k * N + (N - 1)];
    }
    return 0.25 * (s0 + s1 + s2 + s3) / N;
}

std::vector<double> symmetrize(const ReferenceData& ref,
                               const std::vector<double>& phi,
                               const std::vector<IMat>& group) {
    const Grid& g = ref.grid;
    const int N = g.N;
    if (group.empty()) return phi;
    if (N % 2 == 0)
        throw ConfigError("symmetrization needs an odd node count per axis");
    std::vector<double> acc(phi.size(), 0.0);
    if (g.n == 1) {
        for (const IMat& m : group) {
            if (m[0][0] == 1)
                for (int i = 0; i < N; ++i) acc[i] += phi[i];
            else
                for (int i = 0; i < N; ++i) acc[i] += phi[N - 1 - i];
        }
    } else {
        const int c = (N - 1) / 2;
        for (const IMat& m : group)
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j) {
                    int a = i - c, b = j - c;
                    int ia = m[0][0] * a + m[0][1] * b + c;
                    int ib = m[1][0] * a + m[1][1] * b + c;
                    acc[(std::size_t)i * N + j] += phi[(std::size_t)ia * N + ib];
                }
    }
    const double inv = 1.0 / group.size();
    for (double& v : acc) v *= inv;
    return acc;
}

}  // namespace krflow

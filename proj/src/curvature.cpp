#include "krflow/curvature.h"

#include <cmath>

namespace krflow {

RefCurvature build_ref_curvature(const ReferenceData& ref) {
    const Grid& g = ref.grid;
    const std::size_t M = g.size();
    RefCurvature rc;
    rc.g11.resize(M);
    if (g.n == 2) {
        rc.g22.resize(M);
        rc.g12.resize(M);
    }
    if (ref.ke_override) {
        // -log det0 = log 2 + 2 log cosh(x/2), second derivative is det0
        for (std::size_t i = 0; i < M; ++i) rc.g11[i] = ref.det0[i];
        return rc;
    }

    const auto& pts = ref.model.points;
    const std::size_t m = pts.size();
    std::vector<double> P(m);
    const int N = g.N;

    for (std::size_t id = 0; id < M; ++id) {
        double X, Y = 0.0;
        if (g.n == 1) {
            X = ref.x[id];
        } else {
            X = ref.x[id / N];
            Y = ref.x[id % N];
        }
        double emax = -1e300;
        for (std::size_t a = 0; a < m; ++a)
            emax = std::max(emax, pts[a][0] * X + pts[a][1] * Y);
        double S = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            P[a] = std::exp(pts[a][0] * X + pts[a][1] * Y - emax);
            S += P[a];
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t a = 0; a < m; ++a) {
            P[a] /= S;
            mx += P[a] * pts[a][0];
            my += P[a] * pts[a][1];
        }

        if (g.n == 1) {
            double k2 = 0, k3 = 0, m4 = 0;
            for (std::size_t a = 0; a < m; ++a) {
                double c = pts[a][0] - mx;
                k2 += P[a] * c * c;
                k3 += P[a] * c * c * c;
                m4 += P[a] * c * c * c * c;
            }
            double k4 = m4 - 3 * k2 * k2;
            rc.g11[id] = -(k4 / k2 - (k3 / k2) * (k3 / k2));
            continue;
        }

        double k2[2][2] = {{0, 0}, {0, 0}};
        double k3[2][2][2] = {};
        double m4[2][2][2][2] = {};
        for (std::size_t a = 0; a < m; ++a) {
            double c[2] = {pts[a][0] - mx, pts[a][1] - my};
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    k2[i][j] += P[a] * c[i] * c[j];
                    for (int k = 0; k < 2; ++k) {
                        k3[i][j][k] += P[a] * c[i] * c[j] * c[k];
                        for (int l = 0; l < 2; ++l)
                            m4[i][j][k][l] += P[a] * c[i] * c[j] * c[k] * c[l];
                    }
                }
        }
        double k4[2][2][2][2];
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l)
                        k4[i][j][k][l] = m4[i][j][k][l] - k2[i][j] * k2[k][l] -
                                         k2[i][k] * k2[j][l] -
                                         k2[i][l] * k2[j][k];
        double det = k2[0][0] * k2[1][1] - k2[0][1] * k2[1][0];
        double k2i[2][2] = {{k2[1][1] / det, -k2[0][1] / det},
                            {-k2[1][0] / det, k2[0][0] / det}};
        // d_k d_l log det k2 = tr(k2i k4_{..kl}) - tr(k2i k3_k k2i k3_l)
        double G[2][2];
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) {
                double t1 = 0.0;
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j)
                        t1 += k2i[i][j] * k4[j][i][k][l];
                double A[2][2], B[2][2];  // (k2i k3_k), (k2i k3_l)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        A[i][j] = k2i[i][0] * k3[0][j][k] + k2i[i][1] * k3[1][j][k];
                        B[i][j] = k2i[i][0] * k3[0][j][l] + k2i[i][1] * k3[1][j][l];
                    }
                double t2 = 0.0;
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j)
                        t2 += A[i][j] * B[j][i];
                G[k][l] = -(t1 - t2);
            }
        rc.g11[id] = G[0][0];
        rc.g22[id] = G[1][1];
        rc.g12[id] = 0.5 * (G[0][1] + G[1][0]);
    }
    return rc;
}

std::vector<double> scalar_curvature(const PotentialField& f,
                                     const RefCurvature& rc) {
    const ReferenceData& ref = *f.ref;
    const Grid& g = ref.grid;
    const int N = g.N;
    const std::size_t M = g.size();

    double a = boundary_mean(ref, f.phi);
    const PotentialField* fp = &f;
    PotentialField anchored;
    // curvature keeps its own fourth-order Hessian field in 2D
    int want = g.n == 2 ? 4 : 2;
    if (a != 0.0 || f.order != want) {
        std::vector<double> shifted(f.phi);
        for (double& v : shifted) v -= a;
        anchored = PotentialField(ref, std::move(shifted), want);
        fp = &anchored;
    }

    std::vector<double> v(M);
    for (std::size_t i = 0; i < M; ++i)
        v[i] = -std::log(fp->detH[i] / ref.det0[i]);

    std::vector<double> R(M);
    if (g.n == 1) {
        std::vector<double> vxx;
        fd::d2_onesided(v, vxx, 1, N, g.h, 0);
        for (std::size_t i = 0; i < M; ++i)
            R[i] = (rc.g11[i] + vxx[i]) / fp->detH[i];
        return R;
    }
    std::vector<double> vxx, vyy, tmp, vxy;
    fd::d2_onesided(v, vxx, 2, N, g.h, 0);
    fd::d2_onesided(v, vyy, 2, N, g.h, 1);
    fd::d1_onesided(v, tmp, 2, N, g.h, 0);
    fd::d1_onesided(tmp, vxy, 2, N, g.h, 1);
    for (std::size_t i = 0; i < M; ++i) {
        double uxx = rc.g11[i] + vxx[i];
        double uyy = rc.g22[i] + vyy[i];
        double uxy = rc.g12[i] + vxy[i];
        double id = 1.0 / fp->detH[i];
        R[i] = (fp->H22(i) * uxx + fp->H11(i) * uyy - 2 * fp->H12(i) * uxy) * id;
    }
    return R;
}

}  // namespace krflow

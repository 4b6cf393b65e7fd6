#include "icafusion/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace icafusion::metrics {

namespace {

constexpr double kLog2 = 0.6931471805599453;

void check_sizes(const Raster8& f, const Raster8& a, const Raster8& b) {
    if (f.h != a.h || f.w != a.w || f.h != b.h || f.w != b.w)
        throw DimensionError("metrics: image sizes differ");
}

std::array<double, 256> histogram(const Raster8& f) {
    std::array<double, 256> h{};
    for (std::uint8_t v : f.v) h[v] += 1.0;
    const double n = static_cast<double>(f.size());
    for (double& v : h) v /= n;
    return h;
}

double entropy_bits(const std::array<double, 256>& p) {
    double e = 0;
    for (double v : p)
        if (v > 0) e -= v * std::log2(v);
    return e;
}

/// Mutual information in bits from the 256x256 joint histogram.
double mutual_information(const Raster8& x, const Raster8& y) {
    std::vector<double> joint(256 * 256, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) joint[x.v[i] * 256 + y.v[i]] += 1.0;
    const double n = static_cast<double>(x.size());
    std::array<double, 256> px{}, py{};
    for (int a = 0; a < 256; ++a)
        for (int b = 0; b < 256; ++b) {
            joint[a * 256 + b] /= n;
            px[a] += joint[a * 256 + b];
            py[b] += joint[a * 256 + b];
        }
    double mi = 0;
    for (int a = 0; a < 256; ++a) {
        if (px[a] <= 0) continue;
        for (int b = 0; b < 256; ++b) {
            const double pab = joint[a * 256 + b];
            if (pab > 0) mi += pab * std::log2(pab / (px[a] * py[b]));
        }
    }
    return mi;
}

/// Nonlinear correlation coefficient: symmetric uncertainty
/// 2*MI / (H(X)+H(Y)), which is 1 for identical inputs and 0 for
/// independent ones. Degenerate constant pairs (no entropy on either side)
/// count as perfectly dependent.
double ncc(const Raster8& x, const Raster8& y) {
    const double hx = entropy_bits(histogram(x));
    const double hy = entropy_bits(histogram(y));
    if (hx + hy <= 0) return 1.0;
    return 2.0 * mutual_information(x, y) / (hx + hy);
}

/// Eigenvalues of a symmetric 3x3 matrix (trigonometric form).
std::array<double, 3> sym3_eigenvalues(const std::array<std::array<double, 3>, 3>& m) {
    const double p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    const double q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if (p1 == 0.0) return {m[0][0], m[1][1], m[2][2]};
    const double a00 = m[0][0] - q, a11 = m[1][1] - q, a22 = m[2][2] - q;
    const double p2 = a00 * a00 + a11 * a11 + a22 * a22 + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    // det(B) / 2 with B = (M - qI) / p
    std::array<std::array<double, 3>, 3> b;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) b[i][j] = (m[i][j] - (i == j ? q : 0.0)) / p;
    const double detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1]) -
                        b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0]) +
                        b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    double r = detb / 2.0;
    r = std::clamp(r, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    return {e1, e2, e3};
}

struct EdgeMap {
    std::vector<double> strength;     // Sobel magnitude, interior pixels
    std::vector<double> orientation;  // undirected edge angle in [0, pi)
    int h = 0, w = 0;                 // interior dimensions
};

/// Sobel strength and undirected orientation on the interior (the border
/// ring is excluded). Undirected angles keep the metric invariant under
/// consistent transposition of all three images.
EdgeMap sobel_edges(const Raster8& f) {
    EdgeMap e;
    e.h = std::max(0, f.h - 2);
    e.w = std::max(0, f.w - 2);
    e.strength.resize(static_cast<std::size_t>(e.h) * e.w);
    e.orientation.resize(e.strength.size());
    for (int i = 1; i + 1 < f.h; ++i)
        for (int j = 1; j + 1 < f.w; ++j) {
            const double gx = -1.0 * f.at(i - 1, j - 1) + 1.0 * f.at(i - 1, j + 1) -
                              2.0 * f.at(i, j - 1) + 2.0 * f.at(i, j + 1) -
                              1.0 * f.at(i + 1, j - 1) + 1.0 * f.at(i + 1, j + 1);
            const double gy = -1.0 * f.at(i - 1, j - 1) - 2.0 * f.at(i - 1, j) -
                              1.0 * f.at(i - 1, j + 1) + 1.0 * f.at(i + 1, j - 1) +
                              2.0 * f.at(i + 1, j) + 1.0 * f.at(i + 1, j + 1);
            double ang = std::atan2(gy, gx);
            if (ang < 0) ang += M_PI;
            if (ang >= M_PI) ang -= M_PI;
            const std::size_t k = static_cast<std::size_t>(i - 1) * e.w + (j - 1);
            e.strength[k] = std::sqrt(gx * gx + gy * gy);
            e.orientation[k] = ang;
        }
    return e;
}

// Published sigmoid constants of the edge-preservation model.
constexpr double kGammaG = 0.9994, kKappaG = -15.0, kSigmaG = 0.5;
constexpr double kGammaA = 0.9879, kKappaA = -22.0, kSigmaA = 0.8;

double preservation(double g_ratio, double a_sim) {
    const double qg = kGammaG / (1.0 + std::exp(kKappaG * (g_ratio - kSigmaG)));
    const double qa = kGammaA / (1.0 + std::exp(kKappaA * (a_sim - kSigmaA)));
    return qg * qa;
}

// --- VIF helpers -------------------------------------------------------------

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
};

Plane to_plane(const Raster8& r) {
    Plane p(r.h, r.w);
    for (std::size_t i = 0; i < r.size(); ++i) p.v[i] = static_cast<double>(r.v[i]);
    return p;
}

int reflect_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

std::vector<double> gaussian_kernel(int n, double sigma) {
    std::vector<double> k(n);
    const int c = n / 2;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
        k[i] = std::exp(-0.5 * (i - c) * (i - c) / (sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable 'same' filtering with mirrored borders.
Plane filter_same(const Plane& p, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int c = n / 2;
    Plane tmp(p.h, p.w), out(p.h, p.w);
    for (int i = 0; i < p.h; ++i)
        for (int j = 0; j < p.w; ++j) {
            double acc = 0;
            for (int t = 0; t < n; ++t) acc += k[t] * p.at(i, reflect_index(j + t - c, p.w));
            tmp.at(i, j) = acc;
        }
    for (int i = 0; i < p.h; ++i)
        for (int j = 0; j < p.w; ++j) {
            double acc = 0;
            for (int t = 0; t < n; ++t) acc += k[t] * tmp.at(reflect_index(i + t - c, p.h), j);
            out.at(i, j) = acc;
        }
    return out;
}

Plane decimate2(const Plane& p) {
    Plane out((p.h + 1) / 2, (p.w + 1) / 2);
    for (int i = 0; i < out.h; ++i)
        for (int j = 0; j < out.w; ++j) out.at(i, j) = p.at(2 * i, 2 * j);
    return out;
}

Plane multiply(const Plane& a, const Plane& b) {
    Plane out(a.h, a.w);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

constexpr double kVifNoise = 2.0;
constexpr double kVifEps = 1e-10;

/// Accumulates the per-pixel information terms for one (source, fused) pair
/// at one scale.
void vif_accumulate(const Plane& ref, const Plane& dist, const std::vector<double>& win,
                    double& num, double& den) {
    const Plane mu_r = filter_same(ref, win);
    const Plane mu_d = filter_same(dist, win);
    const Plane rr = filter_same(multiply(ref, ref), win);
    const Plane dd = filter_same(multiply(dist, dist), win);
    const Plane rd = filter_same(multiply(ref, dist), win);
    for (std::size_t i = 0; i < ref.v.size(); ++i) {
        double s_rr = std::max(0.0, rr.v[i] - mu_r.v[i] * mu_r.v[i]);
        double s_dd = std::max(0.0, dd.v[i] - mu_d.v[i] * mu_d.v[i]);
        const double s_rd = rd.v[i] - mu_r.v[i] * mu_d.v[i];
        double g = s_rd / (s_rr + kVifEps);
        double sv = s_dd - g * s_rd;
        if (s_rr < kVifEps) {
            g = 0;
            sv = s_dd;
            s_rr = 0;
        }
        if (s_dd < kVifEps) {
            g = 0;
            sv = 0;
        }
        if (g < 0) {
            sv = s_dd;
            g = 0;
        }
        if (sv < kVifEps) sv = kVifEps;
        num += std::log(1.0 + g * g * s_rr / (sv + kVifNoise));
        den += std::log(1.0 + s_rr / kVifNoise);
    }
}

}  // namespace

double ag(const Raster8& f, bool scaled) {
    if (f.h < 2 || f.w < 2) return 0.0;
    double acc = 0;
    for (int i = 0; i + 1 < f.h; ++i)
        for (int j = 0; j + 1 < f.w; ++j) {
            const double dx = static_cast<double>(f.at(i, j + 1)) - f.at(i, j);
            const double dy = static_cast<double>(f.at(i + 1, j)) - f.at(i, j);
            acc += std::sqrt(dx * dx + dy * dy);
        }
    acc /= static_cast<double>(f.h - 1) * (f.w - 1);
    return scaled ? acc / std::sqrt(2.0) : acc;
}

double en(const Raster8& f) { return entropy_bits(histogram(f)); }

double sd(const Raster8& f) {
    double mean = 0;
    for (std::uint8_t v : f.v) mean += v;
    mean /= static_cast<double>(f.size());
    double var = 0;
    for (std::uint8_t v : f.v) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(f.size()));
}

double mi(const Raster8& f, const Raster8& a, const Raster8& b) {
    check_sizes(f, a, b);
    return mutual_information(f, a) + mutual_information(f, b);
}

double sf(const Raster8& f) {
    double rf = 0, cf = 0;
    if (f.w > 1) {
        for (int i = 0; i < f.h; ++i)
            for (int j = 1; j < f.w; ++j) {
                const double d = static_cast<double>(f.at(i, j)) - f.at(i, j - 1);
                rf += d * d;
            }
        rf /= static_cast<double>(f.h) * (f.w - 1);
    }
    if (f.h > 1) {
        for (int i = 1; i < f.h; ++i)
            for (int j = 0; j < f.w; ++j) {
                const double d = static_cast<double>(f.at(i, j)) - f.at(i - 1, j);
                cf += d * d;
            }
        cf /= static_cast<double>(f.h - 1) * f.w;
    }
    return std::sqrt(rf + cf);
}

double ncie(const Raster8& f, const Raster8& a, const Raster8& b) {
    check_sizes(f, a, b);
    const double r_fa = ncc(f, a), r_fb = ncc(f, b), r_ab = ncc(a, b);
    const std::array<std::array<double, 3>, 3> m = {{{1.0, r_ab, r_fa},
                                                     {r_ab, 1.0, r_fb},
                                                     {r_fa, r_fb, 1.0}}};
    const auto eig = sym3_eigenvalues(m);
    double h = 0;
    for (double lam : eig) {
        const double x = std::max(0.0, lam) / 3.0;
        if (x > 0) h += x * std::log(x) / std::log(256.0);
    }
    return 1.0 + h;
}

double qabf(const Raster8& f, const Raster8& a, const Raster8& b, bool normalized) {
    check_sizes(f, a, b);
    const EdgeMap ef = sobel_edges(f), ea = sobel_edges(a), eb = sobel_edges(b);
    const double q_perfect = preservation(1.0, 1.0);

    auto pixel_q = [&](const EdgeMap& src, std::size_t k) {
        const double gs = src.strength[k], gf = ef.strength[k];
        const double mx = std::max(gs, gf);
        const double g_ratio = mx > 0 ? std::min(gs, gf) / mx : 1.0;
        double d = std::abs(src.orientation[k] - ef.orientation[k]);
        d = std::min(d, M_PI - d);
        const double a_sim = 1.0 - d / (M_PI / 2.0);
        double q = preservation(g_ratio, a_sim);
        if (normalized) q /= q_perfect;
        return q;
    };

    double num = 0, den = 0;
    for (std::size_t k = 0; k < ef.strength.size(); ++k) {
        const double wa = ea.strength[k], wb = eb.strength[k];
        num += pixel_q(ea, k) * wa + pixel_q(eb, k) * wb;
        den += wa + wb;
    }
    return den > 0 ? num / den : 0.0;  // no edges anywhere: defined as 0
}

double vif(const Raster8& f, const Raster8& a, const Raster8& b) {
    check_sizes(f, a, b);
    Plane pa = to_plane(a), pb = to_plane(b), pf = to_plane(f);
    // Scales are combined by their information content (num and den pooled
    // across scales and sources). An unweighted mean would let coarse scales
    // with almost no reference variance dominate through spurious
    // regression gains.
    double num = 0, den = 0;
    for (int s = 1; s <= 4; ++s) {
        const int n = (1 << (4 - s + 1)) + 1;  // 17, 9, 5, 3
        const auto win = gaussian_kernel(n, n / 5.0);
        if (s > 1) {
            pa = decimate2(filter_same(pa, win));
            pb = decimate2(filter_same(pb, win));
            pf = decimate2(filter_same(pf, win));
        }
        vif_accumulate(pa, pf, win, num, den);
        vif_accumulate(pb, pf, win, num, den);
    }
    return den > 0 ? num / den : 1.0;
}

MetricReport evaluate(const Raster8& f, const Raster8& a, const Raster8& b) {
    check_sizes(f, a, b);
    MetricReport r;
    r.ag = ag(f);
    r.en = en(f);
    r.sd = sd(f);
    r.mi = mi(f, a, b);
    r.sf = sf(f);
    r.ncie = ncie(f, a, b);
    r.qabf = qabf(f, a, b);
    r.vif = vif(f, a, b);
    return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
    if (reports.empty()) throw std::domain_error("mean_report: no reports");
    MetricReport m;
    for (const auto& r : reports) {
        m.ag += r.ag;
        m.en += r.en;
        m.sd += r.sd;
        m.mi += r.mi;
        m.sf += r.sf;
        m.ncie += r.ncie;
        m.qabf += r.qabf;
        m.vif += r.vif;
    }
    const double n = static_cast<double>(reports.size());
    m.ag /= n;
    m.en /= n;
    m.sd /= n;
    m.mi /= n;
    m.sf /= n;
    m.ncie /= n;
    m.qabf /= n;
    m.vif /= n;
    return m;
}

}  // namespace icafusion::metrics

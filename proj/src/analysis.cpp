#include "etw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "etw/error.hpp"

namespace etw::analysis {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double f_sf(double F, double d1, double d2) {
    if (F == kInf) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::fisher_f(d1, d2), F));
}

double t_two_tailed(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t))));
}

double chi2_sf(double x, double df) {
    if (x == kInf) return 0.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), x));
}

// k x (k-1) orthonormal contrasts (normalised Helmert), orthogonal to the unit vector.
Eigen::MatrixXd contrasts(int k) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(k, k - 1);
    for (int j = 1; j < k; ++j) {
        const double norm = std::sqrt(static_cast<double>(j) * (j + 1));
        for (int i = 0; i < j; ++i) c(i, j - 1) = 1.0 / norm;
        c(j, j - 1) = -static_cast<double>(j) / norm;
    }
    return c;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

double gg_epsilon(const Eigen::MatrixXd& s) {
    const double p = static_cast<double>(s.rows());
    const double tr = s.trace();
    const double tr2 = (s * s).trace();
    if (tr2 <= 0.0) return 1.0;
    return std::min(1.0, tr * tr / (p * tr2));
}

Mauchly mauchly_of(const Eigen::MatrixXd& s, int n) {
    Mauchly m;
    const int p = static_cast<int>(s.rows());
    m.df = p * (p + 1) / 2 - 1;
    if (p < 2) return m;
    const double tr = s.trace();
    if (tr <= 0.0) return m;
    const double det = s.determinant();
    m.W = det / std::pow(tr / p, p);
    const double f = (n - 1) - (2.0 * p * p + p + 2.0) / (6.0 * p);
    if (m.W <= 0.0) {
        m.W = 0.0;
        m.chi2 = kInf;
        m.p = 0.0;
        return m;
    }
    m.chi2 = -f * std::log(m.W);
    m.p = chi2_sf(std::max(0.0, m.chi2), m.df);
    return m;
}

FTest f_test(double ss, double ss_error, double df1, double df2, double scale, double eps) {
    FTest t;
    t.ss = ss;
    t.ss_error = ss_error;
    t.df1 = df1;
    t.df2 = df2;
    t.gg_epsilon = eps;
    const double tiny = 1e-12 * scale;
    if (ss <= tiny) {
        t.ss = 0.0;
        return t;  // F = 0, p = 1
    }
    t.partial_eta2 = ss / (ss + ss_error);
    if (ss_error <= tiny) {
        t.F = kInf;
        t.p = t.p_gg = 0.0;
        return t;
    }
    t.F = (ss / df1) / (ss_error / df2);
    t.p = f_sf(t.F, df1, df2);
    t.p_gg = f_sf(t.F, df1 * eps, df2 * eps);
    return t;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

}  // namespace

double in_region_rate(const Mask& mask, Region region, const HandMap& map) {
    if (mask.width() != map.width() || mask.height() != map.height())
        fail(ErrorCode::DimensionMismatch, "mask and hand map dimensions differ");
    std::size_t painted = 0, in = 0;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            if (!mask.get({x, y})) continue;
            const Region r = map.at({x, y});
            if (r == Region::Background) continue;
            ++painted;
            if (r == region) ++in;
        }
    if (painted == 0) fail(ErrorCode::EmptyMask, "rate undefined for a mask with no painted hand cells");
    return 100.0 * static_cast<double>(in) / static_cast<double>(painted);
}

int Heatmap::max_count() const { return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end()); }

Heatmap aggregate_heatmap(const std::vector<SensationReport>& reports) {
    if (reports.empty()) fail(ErrorCode::Argument, "heatmap needs at least one report");
    Heatmap h;
    h.width = reports[0].area.width();
    h.height = reports[0].area.height();
    h.counts.assign(static_cast<std::size_t>(h.width) * h.height, 0);
    double sx = 0.0, sy = 0.0;
    for (const auto& r : reports) {
        if (r.area.width() != h.width || r.area.height() != h.height)
            fail(ErrorCode::DimensionMismatch, "reports have different raster sizes");
        for (int y = 0; y < h.height; ++y)
            for (int x = 0; x < h.width; ++x)
                if (r.area.get({x, y})) ++h.counts[static_cast<std::size_t>(y) * h.width + x];
        h.strongest.push_back(r.strongest);
        sx += r.strongest.x;
        sy += r.strongest.y;
    }
    h.reports = reports.size();
    h.mean_strongest = {sx / static_cast<double>(h.reports), sy / static_cast<double>(h.reports)};
    return h;
}

void write_heatmap_csv(std::ostream& out, const Heatmap& h) {
    for (int y = 0; y < h.height; ++y) {
        for (int x = 0; x < h.width; ++x) out << (x ? "," : "") << h.at({x, y});
        out << '\n';
    }
}

std::string heatmap_svg(const Heatmap& h, const HandMap& map, const std::string& title) {
    if (h.width != map.width() || h.height != map.height())
        fail(ErrorCode::DimensionMismatch, "heatmap and hand map dimensions differ");
    constexpr int px = 8;
    constexpr int header = 24;
    const int maxc = std::max(1, h.max_count());
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << h.width * px << "\" height=\""
      << h.height * px + header << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"4\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">" << title << " (n=" << h.reports
      << ", max=" << h.max_count() << ")</text>\n";
    s << "<g transform=\"translate(0," << header << ")\">\n";
    for (int y = 0; y < h.height; ++y)
        for (int x = 0; x < h.width; ++x) {
            if (map.at({x, y}) == Region::Background) continue;
            const int c = h.at({x, y});
            s << "<rect x=\"" << x * px << "\" y=\"" << y * px << "\" width=\"" << px << "\" height=\"" << px
              << "\" fill=\"";
            if (c == 0) {
                s << "#e6e6e6\"/>\n";
            } else {
                // linear count scale from pale yellow to red
                const double f = static_cast<double>(c) / maxc;
                const int g = static_cast<int>(std::lround(230 * (1.0 - f)));
                s << "rgb(255," << g << ",0)\" fill-opacity=\"" << 0.35 + 0.65 * f << "\"/>\n";
            }
        }
    for (const auto& c : h.strongest)
        s << "<circle cx=\"" << (c.x + 0.5) * px << "\" cy=\"" << (c.y + 0.5) * px << "\" r=\"3\" fill=\"black\"/>\n";
    s << "<circle cx=\"" << (h.mean_strongest.x + 0.5) * px << "\" cy=\"" << (h.mean_strongest.y + 0.5) * px
      << "\" r=\"5\" fill=\"white\" stroke=\"black\"/>\n";
    s << "</g>\n</svg>\n";
    return s.str();
}

double strongest_point_rate(const std::vector<SensationReport>& reports, Region region, const HandMap& map) {
    if (reports.empty()) fail(ErrorCode::Argument, "strongest-point rate needs at least one report");
    std::size_t in = 0;
    for (const auto& r : reports) {
        if (!map.contains(r.strongest)) fail(ErrorCode::DimensionMismatch, "strongest point outside the hand map");
        if (map.at(r.strongest) == region) ++in;
    }
    return static_cast<double>(in) / static_cast<double>(reports.size());
}

double RmAnovaResult::ss_components() const {
    return ss_subjects + a.ss + a.ss_error + b.ss + b.ss_error + ab.ss + ab.ss_error;
}

Mauchly mauchly(const std::vector<std::vector<double>>& levels) {
    if (levels.size() < 2) fail(ErrorCode::Design, "Mauchly's test needs at least 2 subjects");
    const auto m = to_matrix(levels);
    if (m.cols() < 2) fail(ErrorCode::Design, "Mauchly's test needs at least 2 levels");
    return mauchly_of(covariance(m * contrasts(static_cast<int>(m.cols()))), static_cast<int>(m.rows()));
}

RmAnovaResult rm_anova_2way(const std::vector<std::vector<std::vector<double>>>& data,
                            const RmAnovaOptions& options) {
    const int n = static_cast<int>(data.size());
    if (n < 2) fail(ErrorCode::Design, "repeated-measures ANOVA needs at least 2 subjects");
    const int a = static_cast<int>(data[0].size());
    const int b = a > 0 ? static_cast<int>(data[0][0].size()) : 0;
    if (a < 2 || b < 2) fail(ErrorCode::Design, "each factor needs at least 2 levels");
    for (int s = 0; s < n; ++s) {
        if (static_cast<int>(data[s].size()) != a) fail(ErrorCode::Design, "unbalanced design: subject " + std::to_string(s));
        for (int i = 0; i < a; ++i) {
            if (static_cast<int>(data[s][i].size()) != b)
                fail(ErrorCode::Design, "unbalanced design: subject " + std::to_string(s));
            for (double v : data[s][i])
                if (!std::isfinite(v)) fail(ErrorCode::Design, "missing cell for subject " + std::to_string(s));
        }
    }

    const auto y = [&](int s, int i, int j) { return data[s][i][j]; };
    double G = 0.0;
    std::vector<double> S(n, 0.0), A(a, 0.0), B(b, 0.0);
    std::vector<std::vector<double>> AB(a, std::vector<double>(b, 0.0)), SA(n, std::vector<double>(a, 0.0)),
        SB(n, std::vector<double>(b, 0.0));
    for (int s = 0; s < n; ++s)
        for (int i = 0; i < a; ++i)
            for (int j = 0; j < b; ++j) {
                const double v = y(s, i, j);
                G += v;
                S[s] += v;
                A[i] += v;
                B[j] += v;
                AB[i][j] += v;
                SA[s][i] += v;
                SB[s][j] += v;
            }
    G /= n * a * b;
    for (auto& v : S) v /= a * b;
    for (auto& v : A) v /= n * b;
    for (auto& v : B) v /= n * a;
    for (auto& r : AB)
        for (auto& v : r) v /= n;
    for (auto& r : SA)
        for (auto& v : r) v /= b;
    for (auto& r : SB)
        for (auto& v : r) v /= a;

    RmAnovaResult res;
    res.subjects = n;
    res.levels_a = a;
    res.levels_b = b;
    res.greenhouse_geisser = options.greenhouse_geisser;

    double ss_a = 0, ss_b = 0, ss_ab = 0, ss_as = 0, ss_bs = 0, ss_abs = 0, ss_s = 0, ss_t = 0;
    for (int s = 0; s < n; ++s) ss_s += (S[s] - G) * (S[s] - G);
    ss_s *= a * b;
    for (int i = 0; i < a; ++i) ss_a += (A[i] - G) * (A[i] - G);
    ss_a *= n * b;
    for (int j = 0; j < b; ++j) ss_b += (B[j] - G) * (B[j] - G);
    ss_b *= n * a;
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j) {
            const double e = AB[i][j] - A[i] - B[j] + G;
            ss_ab += e * e;
        }
    ss_ab *= n;
    for (int s = 0; s < n; ++s) {
        for (int i = 0; i < a; ++i) {
            const double e = SA[s][i] - S[s] - A[i] + G;
            ss_as += e * e;
        }
        for (int j = 0; j < b; ++j) {
            const double e = SB[s][j] - S[s] - B[j] + G;
            ss_bs += e * e;
        }
        for (int i = 0; i < a; ++i)
            for (int j = 0; j < b; ++j) {
                const double v = y(s, i, j);
                const double e = v - SA[s][i] - SB[s][j] - AB[i][j] + S[s] + A[i] + B[j] - G;
                ss_abs += e * e;
                ss_t += (v - G) * (v - G);
            }
    }
    ss_as *= b;
    ss_bs *= a;
    res.ss_total = ss_t;
    res.ss_subjects = ss_s;

    // Sphericity and epsilons from orthonormal contrasts of the relevant marginals.
    std::vector<std::vector<double>> marg_a(n, std::vector<double>(a)), marg_b(n, std::vector<double>(b)),
        cells(n, std::vector<double>(a * b));
    for (int s = 0; s < n; ++s) {
        marg_a[s] = SA[s];
        marg_b[s] = SB[s];
        for (int i = 0; i < a; ++i)
            for (int j = 0; j < b; ++j) cells[s][i * b + j] = y(s, i, j);
    }
    const Eigen::MatrixXd ca = contrasts(a), cb = contrasts(b);
    Eigen::MatrixXd cab(a * b, (a - 1) * (b - 1));
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j)
            for (int p = 0; p < a - 1; ++p)
                for (int q = 0; q < b - 1; ++q) cab(i * b + j, p * (b - 1) + q) = ca(i, p) * cb(j, q);
    const Eigen::MatrixXd s_a = covariance(to_matrix(marg_a) * ca);
    const Eigen::MatrixXd s_b = covariance(to_matrix(marg_b) * cb);
    const Eigen::MatrixXd s_ab = covariance(to_matrix(cells) * cab);
    res.mauchly_a = mauchly_of(s_a, n);
    res.mauchly_b = mauchly_of(s_b, n);
    res.mauchly_ab = mauchly_of(s_ab, n);

    const double dn = n - 1;
    res.a = f_test(ss_a, ss_as, a - 1, (a - 1) * dn, ss_t, gg_epsilon(s_a));
    res.b = f_test(ss_b, ss_bs, b - 1, (b - 1) * dn, ss_t, gg_epsilon(s_b));
    res.ab = f_test(ss_ab, ss_abs, (a - 1) * (b - 1), (a - 1) * (b - 1) * dn, ss_t, gg_epsilon(s_ab));

    const int pairs = a * (a - 1) / 2;
    for (int i = 0; i < a; ++i)
        for (int j = i + 1; j < a; ++j) {
            std::vector<double> xi(n), xj(n);
            for (int s = 0; s < n; ++s) {
                xi[s] = SA[s][i];
                xj[s] = SA[s][j];
            }
            PairedT t = paired_t(xi, xj);
            t.i = i;
            t.j = j;
            t.p_bonferroni = std::min(1.0, t.p * pairs);
            res.pairwise_a.push_back(t);
        }
    return res;
}

double mean(const std::vector<double>& v) {
    if (v.empty()) fail(ErrorCode::Argument, "mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) fail(ErrorCode::DegenerateVariance, "standard deviation needs at least 2 values");
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

PairedT paired_t(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(ErrorCode::DimensionMismatch, "paired samples differ in length");
    if (x.size() < 2) fail(ErrorCode::DegenerateVariance, "paired t needs at least 2 pairs");
    std::vector<double> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = x[k] - y[k];
    PairedT r;
    r.df = static_cast<double>(d.size() - 1);
    r.mean_diff = mean(d);
    const double sd = sample_sd(d);
    if (sd == 0.0) {
        if (r.mean_diff == 0.0) return r;
        r.t = r.mean_diff > 0 ? kInf : -kInf;
        r.p = r.p_bonferroni = 0.0;
        return r;
    }
    r.t = r.mean_diff / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p = r.p_bonferroni = t_two_tailed(r.t, r.df);
    return r;
}

TTest unpaired_t(const std::vector<double>& x, const std::vector<double>& y, Variance variance) {
    if (x.size() < 2 || y.size() < 2) fail(ErrorCode::DegenerateVariance, "unpaired t needs at least 2 values per group");
    const double nx = static_cast<double>(x.size()), ny = static_cast<double>(y.size());
    const double mx = mean(x), my = mean(y);
    const double vx = std::pow(sample_sd(x), 2), vy = std::pow(sample_sd(y), 2);
    TTest r;
    double se2;
    if (variance == Variance::Pooled) {
        r.df = nx + ny - 2;
        const double sp2 = ((nx - 1) * vx + (ny - 1) * vy) / r.df;
        se2 = sp2 * (1 / nx + 1 / ny);
    } else {
        se2 = vx / nx + vy / ny;
        const double qx = vx / nx, qy = vy / ny;
        r.df = se2 > 0 ? se2 * se2 / (qx * qx / (nx - 1) + qy * qy / (ny - 1)) : nx + ny - 2;
    }
    if (se2 == 0.0) {
        if (mx == my) return r;
        fail(ErrorCode::DegenerateVariance, "both samples have zero variance");
    }
    r.t = (mx - my) / std::sqrt(se2);
    r.p = t_two_tailed(r.t, r.df);
    return r;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(ErrorCode::DimensionMismatch, "paired samples differ in length");
    std::vector<double> d;
    for (std::size_t k = 0; k < x.size(); ++k)
        if (x[k] != y[k]) d.push_back(x[k] - y[k]);
    const int n = static_cast<int>(d.size());
    if (n < 5)
        fail(ErrorCode::TooFewDifferences,
             "Wilcoxon normal approximation needs at least 5 non-zero differences, got " + std::to_string(n));

    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) { return std::abs(d[p]) < std::abs(d[q]); });
    std::vector<double> rank(d.size());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }

    WilcoxonResult r;
    r.n = n;
    for (std::size_t k = 0; k < d.size(); ++k) (d[k] > 0 ? r.w_plus : r.w_minus) += rank[k];
    const double dn = n;
    const double mu = dn * (dn + 1) / 4.0;
    const double var = dn * (dn + 1) * (2 * dn + 1) / 24.0 - tie_term / 48.0;
    r.z = (r.w_plus - mu) / std::sqrt(var);
    r.p = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
    return r;
}

}  // namespace etw::analysis

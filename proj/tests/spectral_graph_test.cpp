#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "eemdx/rng.hpp"
#include "eemdx/spectral_graph.hpp"

using namespace eemdx;

namespace {

CityGraph two_nodes(double w) {
    SquareMatrix m(2);
    m(0, 1) = m(1, 0) = w;
    return CityGraph::from_weights({"a", "b"}, m);
}

CityGraph random_graph(std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed);
    std::vector<City> cities;
    for (std::size_t i = 0; i < n; ++i) {
        cities.push_back({"c" + std::to_string(i), -30 + 30 * rng.next_uniform(), -70 + 35 * rng.next_uniform()});
    }
    return build_graph(cities, seed % 2 ? WeightMode::gaussian_kernel : WeightMode::literal_distance);
}

GraphSignal random_signal(std::uint64_t seed, std::size_t n) {
    CounterRng rng(seed);
    GraphSignal x(n);
    for (auto& v : x) v = 10 * rng.next_normal();
    return x;
}

double norm(const GraphSignal& x) {
    double s = 0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

// Determinant by Gaussian elimination with partial pivoting.
double determinant(std::vector<std::vector<double>> a) {
    const std::size_t n = a.size();
    double det = 1;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        }
        if (a[piv][c] == 0) return 0;
        if (piv != c) {
            std::swap(a[piv], a[c]);
            det = -det;
        }
        det *= a[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return det;
}

}  // namespace

TEST(Haversine, KnownDistances) {
    EXPECT_NEAR(haversine_km(0, 0, 1, 0), 6371.0 * std::numbers::pi / 180, 1e-9);
    // Antipodal points are ill-conditioned for any formula: ~sqrt(eps) relative accuracy.
    EXPECT_NEAR(haversine_km(10, 20, -10, -160), 6371.0 * std::numbers::pi, 1e-3);
    EXPECT_DOUBLE_EQ(haversine_km(-23.5, -46.6, -23.5, -46.6), 0.0);
    EXPECT_NEAR(haversine_km(-23.55, -46.63, -22.91, -43.17), haversine_km(-22.91, -43.17, -23.55, -46.63), 1e-12);
}

TEST(BuildGraph, TwoNodeSpectrum) {
    const auto g = two_nodes(3);
    EXPECT_DOUBLE_EQ(g.laplacian()(0, 0), 3);
    EXPECT_DOUBLE_EQ(g.laplacian()(0, 1), -3);
    EXPECT_DOUBLE_EQ(g.laplacian()(1, 0), -3);
    EXPECT_DOUBLE_EQ(g.laplacian()(1, 1), 3);
    EXPECT_NEAR(g.eigenvalues()[0], 0, 1e-12);
    EXPECT_NEAR(g.eigenvalues()[1], 6, 1e-12);
}

TEST(BuildGraph, TriangleSpectrumMatchesCharacteristicPolynomial) {
    SquareMatrix w(3, 1.0);
    const auto g = CityGraph::from_weights({"x", "y", "z"}, w);
    const std::vector<double> expected{0, 3, 3};
    for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(g.eigenvalues()[l], expected[l], 1e-12);
    // det(L - lambda I) vanishes at every reported eigenvalue.
    for (double lambda : g.eigenvalues()) {
        std::vector<std::vector<double>> m(3, std::vector<double>(3));
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t j = 0; j < 3; ++j) m[i][j] = g.laplacian()(i, j) - (i == j ? lambda : 0.0);
        }
        EXPECT_NEAR(determinant(m), 0.0, 1e-9);
    }
}

TEST(BuildGraph, Errors) {
    EXPECT_THROW(build_graph({{"a", 0, 0}}), GraphTooSmallError);
    EXPECT_THROW(build_graph({}), GraphTooSmallError);
    EXPECT_THROW(build_graph({{"a", 0, 0}, {"a", 1, 1}}), DuplicateNodeError);
    SquareMatrix asym(2);
    asym(0, 1) = 1;
    asym(1, 0) = 2;
    EXPECT_THROW(CityGraph::from_weights({"a", "b"}, asym), InvalidArgument);
    EXPECT_THROW(parse_weight_mode("euclid"), InvalidArgument);
}

TEST(BuildGraph, LiteralWeightsAreDistances) {
    const std::vector<City> cities{{"p", 0, 0}, {"q", 0, 1}, {"r", 1, 0}};
    const auto g = build_graph(cities, WeightMode::literal_distance);
    EXPECT_DOUBLE_EQ(g.weights()(0, 1), haversine_km(0, 0, 0, 1));
    EXPECT_DOUBLE_EQ(g.weights()(1, 2), haversine_km(0, 1, 1, 0));
    EXPECT_EQ(g.weights()(0, 0), 0.0);
    EXPECT_EQ(g.index_of("r"), 2u);
    EXPECT_THROW(g.index_of("s"), ReferenceError);
}

TEST(BuildGraph, GaussianKernelUsesMedianDistance) {
    const std::vector<City> cities{{"p", 0, 0}, {"q", 0, 1}, {"r", 0, 3}};
    const auto g = build_graph(cities, WeightMode::gaussian_kernel);
    const double d01 = haversine_km(0, 0, 0, 1), d02 = haversine_km(0, 0, 0, 3), d12 = haversine_km(0, 1, 0, 3);
    const double theta = d12;  // middle of the three distances
    EXPECT_NEAR(g.weights()(0, 1), std::exp(-d01 * d01 / (2 * theta * theta)), 1e-15);
    EXPECT_NEAR(g.weights()(0, 2), std::exp(-d02 * d02 / (2 * theta * theta)), 1e-15);
    EXPECT_NEAR(g.weights()(1, 2), std::exp(-0.5), 1e-15);
}

TEST(BuildGraph, StructuralInvariantsOnRandomGraphs) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto g = random_graph(s, 2 + s % 25);
        const std::size_t n = g.size();
        const auto& u = g.eigenvectors();
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0;
            for (std::size_t j = 0; j < n; ++j) {
                row += g.laplacian()(i, j);
                EXPECT_EQ(g.weights()(i, j), g.weights()(j, i));
            }
            EXPECT_NEAR(row, 0.0, 1e-9 * std::max(1.0, g.laplacian()(i, i)));
        }
        EXPECT_NEAR(g.eigenvalues()[0], 0.0, 1e-9 * std::max(1.0, g.eigenvalues().back()));
        for (std::size_t l = 1; l < n; ++l) EXPECT_LE(g.eigenvalues()[l - 1], g.eigenvalues()[l]);
        // First eigenvector is constant, sign-normalised to positive.
        for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(u(k, 0), 1 / std::sqrt(double(n)), 1e-6);
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) {
                double dot = 0;
                for (std::size_t k = 0; k < n; ++k) dot += u(k, a) * u(k, b);
                EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-8);
            }
        }
        // u_l^T L u_l = lambda_l.
        for (std::size_t l = 0; l < n; ++l) {
            double q = 0;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) q += u(i, l) * g.laplacian()(i, j) * u(j, l);
            }
            EXPECT_NEAR(q, g.eigenvalues()[l], 1e-8 * std::max(1.0, g.eigenvalues().back()));
        }
    }
}

TEST(SymmetricEigen, AgreesWithEigenLibrary) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const std::size_t n = 3 + s * 3;
        CounterRng rng(derive_seed(55, s));
        SquareMatrix a(n);
        Eigen::MatrixXd e(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                a(i, j) = a(j, i) = rng.next_normal();
                e(i, j) = e(j, i) = a(i, j);
            }
        }
        const auto mine = symmetric_eigen(a);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(e);
        for (std::size_t l = 0; l < n; ++l) {
            EXPECT_NEAR(mine.values[l], ref.eigenvalues()(static_cast<Eigen::Index>(l)), 1e-10);
            // Eigenvalues of a random matrix are simple, so vectors agree up to sign.
            double dot = 0;
            for (std::size_t k = 0; k < n; ++k) {
                dot += mine.vectors(k, l) * ref.eigenvectors()(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
            }
            EXPECT_NEAR(std::abs(dot), 1.0, 1e-9);
        }
    }
}

TEST(SymmetricEigen, DegenerateSpectrumIsDeterministic) {
    SquareMatrix w(6, 1.0);
    const auto a = CityGraph::from_weights({"a", "b", "c", "d", "e", "f"}, w);
    const auto b = CityGraph::from_weights({"a", "b", "c", "d", "e", "f"}, w);
    EXPECT_EQ(a.eigenvectors(), b.eigenvectors());
    for (std::size_t l = 1; l < 6; ++l) EXPECT_NEAR(a.eigenvalues()[l], 6.0, 1e-12);
}

TEST(Gft, ConstantSignal) {
    const auto g = random_graph(3, 9);
    const auto xh = gft(g, GraphSignal(9, 2.5));
    EXPECT_NEAR(xh[0], 2.5 * 3.0, 1e-9);
    for (std::size_t l = 1; l < 9; ++l) EXPECT_NEAR(xh[l], 0.0, 1e-8);
}

TEST(Gft, TwoNodeAntisymmetricSignal) {
    const auto g = two_nodes(3);
    const auto xh = gft(g, GraphSignal{1, -1});
    EXPECT_NEAR(xh[0], 0.0, 1e-12);
    EXPECT_NEAR(std::abs(xh[1]), std::sqrt(2.0), 1e-12);
}

TEST(Gft, ParsevalAndRoundTrip) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto g = random_graph(100 + s, 2 + s);
        const auto x = random_signal(200 + s, g.size());
        const auto xh = gft(g, x);
        EXPECT_NEAR(norm(xh), norm(x), 1e-9 * std::max(1.0, norm(x)));
        const auto back = igft(g, xh);
        for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(back[k], x[k], 1e-8);
    }
}

TEST(Igft, ZeroAndUnitSpectra) {
    const auto g = random_graph(7, 6);
    for (double v : igft(g, GraphSignal(6, 0.0))) EXPECT_EQ(v, 0.0);
    for (std::size_t l = 0; l < 6; ++l) {
        GraphSignal e(6, 0.0);
        e[l] = 1.0;
        const auto col = igft(g, e);
        for (std::size_t k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(col[k], g.eigenvectors()(k, l));
    }
}

TEST(Gft, DimensionErrors) {
    const auto g = two_nodes(1);
    EXPECT_THROW(gft(g, GraphSignal{1, 2, 3}), DimensionError);
    EXPECT_THROW(igft(g, GraphSignal{1}), DimensionError);
    EXPECT_THROW(apply_filter(g, GraphSignal{1}, SpectralFilter::lowpass()), DimensionError);
}

TEST(Filter, TwoNodeAccentuation) {
    const auto y = apply_filter(two_nodes(3), GraphSignal{1, -1}, SpectralFilter::accentuate(1.0));
    EXPECT_NEAR(y[0], 2.0, 1e-12);
    EXPECT_NEAR(y[1], -2.0, 1e-12);
}

TEST(Filter, ConstantSignalPassesBothFilters) {
    const auto g = random_graph(11, 12);
    for (const auto f : {SpectralFilter::accentuate(3.0), SpectralFilter::lowpass(0.1)}) {
        for (double v : apply_filter(g, GraphSignal(12, -4.0), f)) EXPECT_NEAR(v, -4.0, 1e-8);
    }
}

TEST(Filter, LowpassFullCutoffIsIdentity) {
    const auto g = random_graph(12, 10);
    const auto x = random_signal(13, 10);
    const auto y = apply_filter(g, x, SpectralFilter::lowpass(1.0));
    for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(y[k], x[k], 1e-8);
}

TEST(Filter, LowpassKeepsCeilingOfFraction) {
    const auto g = random_graph(14, 7);
    const auto x = random_signal(15, 7);
    const auto yh = gft(g, apply_filter(g, x, SpectralFilter::lowpass(0.5)));  // keeps ceil(3.5) = 4
    const auto xh = gft(g, x);
    for (std::size_t l = 0; l < 4; ++l) EXPECT_NEAR(yh[l], xh[l], 1e-8);
    for (std::size_t l = 4; l < 7; ++l) EXPECT_NEAR(yh[l], 0.0, 1e-8);
}

TEST(Filter, LowpassIsAProjection) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto g = random_graph(300 + s, 3 + 2 * s);
        const auto x = random_signal(400 + s, g.size());
        const auto f = SpectralFilter::lowpass(0.3 + 0.05 * static_cast<double>(s));
        const auto once = apply_filter(g, x, f);
        const auto twice = apply_filter(g, once, f);
        for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(twice[k], once[k], 1e-9);
    }
}

TEST(Filter, AccentuatorNeverShrinksCoefficients) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto g = random_graph(500 + s, 4 + s);
        const auto x = random_signal(600 + s, g.size());
        const auto xh = gft(g, x);
        const auto yh = gft(g, apply_filter(g, x, SpectralFilter::accentuate(0.5 * static_cast<double>(s))));
        for (std::size_t l = 0; l < xh.size(); ++l) EXPECT_GE(std::abs(yh[l]), std::abs(xh[l]) - 1e-9);
    }
}

TEST(Filter, ParameterValidation) {
    const auto g = two_nodes(1);
    EXPECT_THROW(apply_filter(g, GraphSignal{1, 2}, SpectralFilter::accentuate(-0.1)), InvalidArgument);
    EXPECT_THROW(apply_filter(g, GraphSignal{1, 2}, SpectralFilter::lowpass(0.0)), InvalidArgument);
    EXPECT_THROW(apply_filter(g, GraphSignal{1, 2}, SpectralFilter::lowpass(1.5)), InvalidArgument);
    EXPECT_NO_THROW(apply_filter(g, GraphSignal{1, 2}, SpectralFilter::accentuate(0.0)));
}

TEST(GraphExport, EdgeListAndSpectrum) {
    const auto g = two_nodes(3);
    EXPECT_EQ(edges_to_csv(g), "id_i,id_j,w_ij\na,b,3\n");
    const auto csv = spectrum_to_csv(g);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "index,eigenvalue");
    const auto row2 = csv.find("\n2,");
    ASSERT_NE(row2, std::string::npos);
    EXPECT_NEAR(std::stod(csv.substr(row2 + 3)), 6.0, 1e-12);
}

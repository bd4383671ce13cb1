#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "aforge/adjoint.hpp"
#include "aforge/cg.hpp"
#include "aforge/ops.hpp"
#include "aforge/tensor.hpp"
#include "test_util.hpp"

using namespace aforge;
using testutil::random_tensor;

namespace {

// Independent triple-loop product used as the matmul oracle.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
    Tensor out({a.extent(0), b.extent(1)});
    for (std::size_t i = 0; i < a.extent(0); ++i)
        for (std::size_t j = 0; j < b.extent(1); ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < a.extent(1); ++p) acc += a.at(i, p) * b.at(p, j);
            out.at(i, j) = acc;
        }
    return out;
}

// Quadruple-loop direct sum with the documented ky, kx, ci accumulation order.
Tensor conv2d_oracle(const Tensor& in, const Tensor& ker, std::size_t stride, std::size_t pad) {
    const std::size_t h = in.extent(0), w = in.extent(1), cin = in.extent(2);
    const std::size_t kh = ker.extent(0), kw = ker.extent(1), cout = ker.extent(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::size_t ow = (w + 2 * pad - kw) / stride + 1;
    Tensor out({oh, ow, cout});
    for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox)
            for (std::size_t co = 0; co < cout; ++co) {
                double acc = 0.0;
                for (std::size_t ky = 0; ky < kh; ++ky)
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                        const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                        if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 || ix >= static_cast<long>(w))
                            continue;
                        for (std::size_t ci = 0; ci < cin; ++ci)
                            acc += in.at(iy, ix, ci) * ker.at(ky, kx, ci, co);
                    }
                out.at(oy, ox, co) = acc;
            }
    return out;
}

}  // namespace

TEST(Matmul, IdentityPassesThrough) {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor b({2, 3}, {1, 2, 3, 4, 5, 6});
    testutil::expect_bitwise_equal(matmul(eye, b), b);
}

TEST(Matmul, HandComputedCase) {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor expect({2, 1}, {3, 7});
    testutil::expect_bitwise_equal(matmul(a, b), expect);
    testutil::expect_bitwise_equal(matmul_oracle(a, b), expect);
}

TEST(Matmul, ZeroAnnihilates) {
    Tensor a = random_tensor({3, 4}, 11);
    Tensor z({4, 2}, 0.0);
    Tensor out = matmul(a, z);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    Tensor a({2, 3});
    Tensor b({2, 3});
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos);
    }
}

TEST(Matmul, AgreesWithOracleOnRandomCases) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        const std::size_t m = 1 + rng.uniform_int(5), k = 1 + rng.uniform_int(5),
                          n = 1 + rng.uniform_int(5);
        Tensor a = random_tensor({m, k}, 100 + s);
        Tensor b = random_tensor({k, n}, 200 + s);
        testutil::expect_bitwise_equal(matmul(a, b), matmul_oracle(a, b));
    }
}

TEST(SoftmaxRows, SymmetricRow) {
    Tensor x({1, 2}, {0.0, 0.0});
    Tensor p = softmax_rows(x);
    EXPECT_DOUBLE_EQ(p.at(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(p.at(0, 1), 0.5);
}

TEST(SoftmaxRows, LargeLogitsDoNotOverflow) {
    Tensor x({1, 2}, {1000.0, 1000.0});
    Tensor p = softmax_rows(x);
    EXPECT_DOUBLE_EQ(p.at(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(p.at(0, 1), 0.5);
}

TEST(SoftmaxRows, ClosedFormQuarterThreeQuarters) {
    Tensor x({1, 2}, {0.0, std::log(3.0)});
    Tensor p = softmax_rows(x);
    EXPECT_NEAR(p.at(0, 0), 0.25, 1e-15);
    EXPECT_NEAR(p.at(0, 1), 0.75, 1e-15);
}

TEST(SoftmaxRows, RowsSumToOneAndShiftInvariant) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        Tensor x = random_tensor({4, 7}, 300 + s, -30.0, 30.0);
        Tensor p = softmax_rows(x);
        for (std::size_t i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < 7; ++j) {
                EXPECT_GE(p.at(i, j), 0.0);
                sum += p.at(i, j);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
        Tensor shifted = x;
        const double c = 13.75;
        for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += c;
        testutil::expect_near_all(softmax_rows(shifted), p, 1e-12);
    }
}

TEST(Conv2d, OneByOneIdentityKernel) {
    Tensor in = random_tensor({4, 5, 3}, 7);
    Tensor ker({1, 1, 3, 3}, 0.0);
    for (std::size_t c = 0; c < 3; ++c) ker.at(0, 0, c, c) = 1.0;
    testutil::expect_bitwise_equal(conv2d(in, ker, 1, 0), in);
}

TEST(Conv2d, AllOnesKernelOnConstantInput) {
    Tensor in({5, 5, 1}, 0.3);
    Tensor ker({3, 3, 1, 1}, 1.0);
    Tensor out = conv2d(in, ker, 1, 0);
    ASSERT_EQ(out.extent(0), 3u);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], 9 * 0.3, 1e-15);
}

TEST(Conv2d, MatchesOracleExactly) {
    for (std::uint64_t s = 0; s < 30; ++s) {
        Rng rng(s);
        const std::size_t h = 4 + rng.uniform_int(5), w = 4 + rng.uniform_int(5);
        const std::size_t cin = 1 + rng.uniform_int(4), cout = 1 + rng.uniform_int(4);
        const std::size_t kh = 1 + rng.uniform_int(4), kw = 1 + rng.uniform_int(4);
        const std::size_t stride = 1 + rng.uniform_int(2), pad = rng.uniform_int(2);
        Tensor in = random_tensor({h, w, cin}, 1000 + s);
        Tensor ker = random_tensor({kh, kw, cin, cout}, 2000 + s);
        testutil::expect_bitwise_equal(conv2d(in, ker, stride, pad),
                                       conv2d_oracle(in, ker, stride, pad));
    }
}

TEST(Conv2d, KernelLargerThanPaddedInputFails) {
    Tensor in({2, 2, 1});
    Tensor ker({5, 5, 1, 1});
    EXPECT_THROW(conv2d(in, ker, 1, 0), ShapeError);
}

TEST(DepthwiseSeparable, DeltaDepthIdentityPointLeavesInputUnchanged) {
    Tensor in = random_tensor({4, 4, 2}, 21);
    Tensor depth({3, 3, 2}, 0.0);
    depth.at(1, 1, 0) = 1.0;
    depth.at(1, 1, 1) = 1.0;
    Tensor point({1, 1, 2, 2}, 0.0);
    point.at(0, 0, 0, 0) = 1.0;
    point.at(0, 0, 1, 1) = 1.0;
    Tensor out = depthwise_separable_conv2d(in, depth, point, 1, 1);
    testutil::expect_near_all(out, in, 0.0);
}

TEST(DepthwiseSeparable, EqualsCompositionOfPrimitiveConvs) {
    Tensor in = random_tensor({6, 5, 3}, 22);
    Tensor depth = random_tensor({3, 3, 3}, 23);
    Tensor point = random_tensor({1, 1, 3, 4}, 24);
    Tensor ds = depthwise_separable_conv2d(in, depth, point, 1, 1);

    // Per-channel conv expressed as a block-diagonal full conv.
    Tensor blockdiag({3, 3, 3, 3}, 0.0);
    for (std::size_t ky = 0; ky < 3; ++ky)
        for (std::size_t kx = 0; kx < 3; ++kx)
            for (std::size_t c = 0; c < 3; ++c) blockdiag.at(ky, kx, c, c) = depth.at(ky, kx, c);
    Tensor composed = conv2d(conv2d(in, blockdiag, 1, 1), point, 1, 0);
    testutil::expect_near_all(ds, composed, 1e-12);
}

TEST(DepthwiseSeparable, ConstantInputGivesConstantOutput) {
    Tensor in({5, 5, 2}, 0.4);
    Tensor depth = random_tensor({3, 3, 2}, 25);
    Tensor point = random_tensor({1, 1, 2, 3}, 26);
    Tensor out = depthwise_separable_conv2d(in, depth, point, 1, 0);
    for (std::size_t c = 0; c < out.extent(2); ++c) {
        const double ref = out.at(0, 0, c);
        for (std::size_t y = 0; y < out.extent(0); ++y)
            for (std::size_t x = 0; x < out.extent(1); ++x)
                EXPECT_NEAR(out.at(y, x, c), ref, 1e-12);
    }
}

TEST(DepthwiseSeparable, ChannelMismatchFails) {
    Tensor in({4, 4, 2});
    Tensor depth({3, 3, 3});
    Tensor point({1, 1, 2, 2});
    EXPECT_THROW(depthwise_separable_conv2d(in, depth, point, 1, 1), ShapeError);
}

TEST(BilinearUpsample, ConstantMapsToIdenticalConstant) {
    Tensor in({3, 5}, 0.7);
    Tensor out = bilinear_upsample(in, 9, 13);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.7);
}

TEST(BilinearUpsample, SinglePixelBroadcasts) {
    Tensor in({1, 1}, {0.42});
    Tensor out = bilinear_upsample(in, 4, 6);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.42);
}

TEST(BilinearUpsample, TwoByTwoColumnsFollowSamplingFormula) {
    Tensor in({2, 2}, {0, 1, 0, 1});
    Tensor out = bilinear_upsample(in, 4, 4);
    const double expect[4] = {0.0, 0.25, 0.75, 1.0};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(out.at(i, j), expect[j], 1e-15);
}

TEST(BilinearUpsample, DownscaleRejected) {
    Tensor in({4, 4});
    EXPECT_THROW(bilinear_upsample(in, 2, 8), ValueError);
}

TEST(CgSolve, IdentityConvergesInOneIteration) {
    std::vector<double> b = {1.0, -2.0, 3.0};
    auto apply = [](const std::vector<double>& x, std::vector<double>& y) { y = x; };
    CgResult res = cg_solve(apply, b, 1e-12, 10);
    EXPECT_EQ(res.iterations, 1);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(res.x[i], b[i], 1e-12);
}

TEST(CgSolve, DiagonalInverse) {
    std::vector<double> b(5, 1.0);
    auto apply = [](const std::vector<double>& x, std::vector<double>& y) {
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = static_cast<double>(i + 1) * x[i];
    };
    CgResult res = cg_solve(apply, b, 1e-12, 50);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(res.x[i], 1.0 / static_cast<double>(i + 1), 1e-10);
}

TEST(CgSolve, FivePointLaplacianMatchesDenseElimination) {
    // 4x4 interior grid, Dirichlet zero boundary: A = 4I - adjacency.
    const std::size_t n = 4;
    auto idx = [n](std::size_t i, std::size_t j) { return i * n + j; };
    auto apply = [n, idx](const std::vector<double>& x, std::vector<double>& y) {
        y.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double v = 4.0 * x[idx(i, j)];
                if (i > 0) v -= x[idx(i - 1, j)];
                if (i + 1 < n) v -= x[idx(i + 1, j)];
                if (j > 0) v -= x[idx(i, j - 1)];
                if (j + 1 < n) v -= x[idx(i, j + 1)];
                y[idx(i, j)] = v;
            }
    };
    Rng rng(99);
    std::vector<double> b(n * n);
    for (double& v : b) v = rng.uniform(-1.0, 1.0);

    // Dense Gaussian elimination oracle.
    std::vector<std::vector<double>> a(n * n, std::vector<double>(n * n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            a[idx(i, j)][idx(i, j)] = 4.0;
            if (i > 0) a[idx(i, j)][idx(i - 1, j)] = -1.0;
            if (i + 1 < n) a[idx(i, j)][idx(i + 1, j)] = -1.0;
            if (j > 0) a[idx(i, j)][idx(i, j - 1)] = -1.0;
            if (j + 1 < n) a[idx(i, j)][idx(i, j + 1)] = -1.0;
        }
    std::vector<double> rhs = b;
    const std::size_t m = n * n;
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        std::swap(a[piv], a[col]);
        std::swap(rhs[piv], rhs[col]);
        for (std::size_t r = col + 1; r < m; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t cc = col; cc < m; ++cc) a[r][cc] -= f * a[col][cc];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> xd(m);
    for (std::size_t r = m; r-- > 0;) {
        double v = rhs[r];
        for (std::size_t cc = r + 1; cc < m; ++cc) v -= a[r][cc] * xd[cc];
        xd[r] = v / a[r][r];
    }

    CgResult res = cg_solve(apply, b, 1e-12, 200);
    for (std::size_t i = 0; i < m; ++i) EXPECT_NEAR(res.x[i], xd[i], 1e-8);
}

TEST(CgSolve, ResidualContractHoldsOnSuccess) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng(s);
        const std::size_t n = 3 + rng.uniform_int(6);
        // Random SPD matrix M M^T + I.
        std::vector<std::vector<double>> mm(n, std::vector<double>(n));
        for (auto& row : mm)
            for (double& v : row) v = rng.uniform(-1.0, 1.0);
        auto apply = [&mm, n](const std::vector<double>& x, std::vector<double>& y) {
            std::vector<double> t(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) t[i] += mm[i][j] * x[j];
            y.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) y[i] += mm[j][i] * t[j];
                y[i] += x[i];
            }
        };
        std::vector<double> b(n);
        for (double& v : b) v = rng.uniform(-2.0, 2.0);
        const double tol = 1e-9;
        CgResult res = cg_solve(apply, b, tol, 500);
        std::vector<double> ax;
        apply(res.x, ax);
        double norm_b = 0.0, norm_r = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            norm_b += b[i] * b[i];
            const double r = ax[i] - b[i];
            norm_r += r * r;
        }
        EXPECT_LE(std::sqrt(norm_r), tol * std::max(1.0, std::sqrt(norm_b)));
    }
}

TEST(CgSolve, NonConvergenceRaisesWithResidual) {
    std::vector<double> b = {1.0, 2.0, 3.0, 4.0};
    auto apply = [](const std::vector<double>& x, std::vector<double>& y) {
        y.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            y[i] = (i == 0 ? 1e6 : 1e-6) * x[i];  // huge condition number
    };
    try {
        cg_solve(apply, b, 1e-14, 1);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_GT(e.final_residual, 0.0);
    }
}

// --- adjoint checks ---------------------------------------------------------

TEST(VjpCheck, LinearOpsAreExactToRounding) {
    Tensor a = random_tensor({3, 4}, 41);
    Tensor b = random_tensor({4, 2}, 42);
    EXPECT_LE(vjp_check(record_matmul(a, b), 7), 1e-9);
    Tensor up = random_tensor({3, 3}, 43);
    EXPECT_LE(vjp_check(record_bilinear_upsample(up, 7, 9), 8), 1e-9);
}

TEST(VjpCheck, SoftmaxAgainstFiniteDifferences) {
    Tensor logits = random_tensor({3, 4}, 44, -2.0, 2.0);
    EXPECT_LE(vjp_check(record_softmax_rows(logits), 9), 1e-5);
}

TEST(VjpCheck, ConvAgainstFiniteDifferences) {
    Tensor in = random_tensor({5, 5, 2}, 45);
    Tensor ker = random_tensor({3, 3, 2, 3}, 46);
    EXPECT_LE(vjp_check(record_conv2d(in, ker, 2, 1), 10), 1e-5);
}

TEST(VjpCheck, HundredSeededInstancesPerOp) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        Rng rng(5000 + s);
        {
            const std::size_t m = 1 + rng.uniform_int(4), k = 1 + rng.uniform_int(4),
                              n = 1 + rng.uniform_int(4);
            Tensor a = random_tensor({m, k}, 3 * s + 1);
            Tensor b = random_tensor({k, n}, 3 * s + 2);
            EXPECT_LE(vjp_check(record_matmul(a, b), s), 1e-5) << "matmul seed " << s;
        }
        {
            Tensor logits = random_tensor({1 + rng.uniform_int(3), 2 + rng.uniform_int(4)},
                                          7000 + s, -3.0, 3.0);
            EXPECT_LE(vjp_check(record_softmax_rows(logits), s), 1e-5) << "softmax seed " << s;
        }
        {
            const std::size_t h = 3 + rng.uniform_int(3), w = 3 + rng.uniform_int(3);
            const std::size_t cin = 1 + rng.uniform_int(2), cout = 1 + rng.uniform_int(2);
            Tensor in = random_tensor({h, w, cin}, 8000 + s);
            Tensor ker = random_tensor({2, 2, cin, cout}, 9000 + s);
            EXPECT_LE(vjp_check(record_conv2d(in, ker, 1, 1), s), 1e-5) << "conv2d seed " << s;
        }
        {
            const std::size_t c = 1 + rng.uniform_int(3);
            Tensor in = random_tensor({4, 4, c}, 10000 + s);
            Tensor ker = random_tensor({3, 3, c}, 11000 + s);
            EXPECT_LE(vjp_check(record_depthwise_conv2d(in, ker, 1, 1), s), 1e-5)
                << "depthwise seed " << s;
        }
        {
            Tensor in = random_tensor({2 + rng.uniform_int(3), 2 + rng.uniform_int(3)}, 12000 + s);
            EXPECT_LE(vjp_check(record_bilinear_upsample(in, in.extent(0) + 3, in.extent(1) + 4), s),
                      1e-5)
                << "upsample seed " << s;
        }
        {
            Tensor x = random_tensor({1 + rng.uniform_int(3), 2 + rng.uniform_int(4)}, 13000 + s);
            Tensor w = random_tensor({x.extent(1), 1 + rng.uniform_int(4)}, 14000 + s);
            Tensor bb = random_tensor({w.extent(1)}, 15000 + s);
            EXPECT_LE(vjp_check(record_linear(x, w, bb), s), 1e-5) << "linear seed " << s;
        }
        {
            Tensor x = random_tensor({3 + rng.uniform_int(4), 3 + rng.uniform_int(4),
                                      1 + rng.uniform_int(3)},
                                     16000 + s);
            EXPECT_LE(vjp_check(record_adaptive_avg_pool(x, 2), s), 1e-5) << "pool seed " << s;
        }
        {
            Tensor x = random_tensor({2 + rng.uniform_int(4), 1 + rng.uniform_int(5)}, 17000 + s);
            EXPECT_LE(vjp_check(record_mean_rows(x), s), 1e-5) << "mean_rows seed " << s;
        }
        {
            Tensor x = random_tensor({1 + rng.uniform_int(4), 3 + rng.uniform_int(3)}, 18000 + s);
            std::vector<bool> mask(x.extent(1));
            for (std::size_t j = 0; j < mask.size(); ++j) mask[j] = rng.uniform() < 0.5;
            mask[0] = true;
            EXPECT_LE(vjp_check(record_masked_colsum(x, mask), s), 1e-5) << "colsum seed " << s;
        }
        {
            Tensor x = random_tensor({2 + rng.uniform_int(3), 2 + rng.uniform_int(3)}, 19000 + s,
                                     0.2, 1.0);  // away from the kink
            EXPECT_LE(vjp_check(record_relu(x), s), 1e-5) << "relu seed " << s;
        }
    }
}

TEST(Tensor, RejectsNonFiniteInputAtCheckedConstruction) {
    EXPECT_THROW(Tensor::checked({2}, {1.0, std::nan("")}), ValueError);
    EXPECT_THROW(Tensor::checked({1}, {INFINITY}), ValueError);
    EXPECT_NO_THROW(Tensor::checked({2}, {0.0, -1.5}));
}

TEST(Tensor, ShapeMustMatchDataLength) {
    EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    EXPECT_THROW(Tensor({0, 2}), ShapeError);
}

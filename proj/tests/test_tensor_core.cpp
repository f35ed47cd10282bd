#include "test_util.hpp"

#include <numeric>
#include <stdexcept>

using namespace transmamba;
using testutil::fd_check;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

// Direct summation reference for grouped, strided, dilated cross-correlation.
std::vector<double> naive_conv(const Tensor& in, const Tensor& k, const Tensor& bias, const Conv2dOptions& o) {
    const std::size_t cin = in.size(0), h = in.size(1), w = in.size(2);
    const std::size_t cout = k.size(0), cpg = k.size(1), kh = k.size(2), kw = k.size(3);
    const std::size_t opg = cout / o.groups;
    const std::size_t oh = (h + 2 * o.padding - o.dilation * (kh - 1) - 1) / o.stride + 1;
    const std::size_t ow = (w + 2 * o.padding - o.dilation * (kw - 1) - 1) / o.stride + 1;
    (void)cin;
    std::vector<double> out(cout * oh * ow, 0.0);
    for (std::size_t co = 0; co < cout; ++co) {
        const std::size_t g = co / opg;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                double acc = bias.defined() ? bias.data()[co] : 0.0;
                for (std::size_t ci = 0; ci < cpg; ++ci) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long iy = static_cast<long>(y * o.stride + ky * o.dilation) - static_cast<long>(o.padding);
                            const long ix = static_cast<long>(x * o.stride + kx * o.dilation) - static_cast<long>(o.padding);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += k.data()[((co * cpg + ci) * kh + ky) * kw + kx] *
                                   in.data()[((g * cpg + ci) * h + iy) * w + ix];
                        }
                    }
                }
                out[(co * oh + y) * ow + x] = acc;
            }
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("conv2d") {
    TEST_CASE("all-ones 3x3 counts nine at the centre") {
        const Tensor in = Tensor::full({1, 3, 3}, 1.0);
        const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
        const Tensor out = conv2d(in, k, Tensor(), {1, 1, 1, 1});
        CHECK(out.at({0, 1, 1}) == 9.0);
        CHECK(out.at({0, 0, 0}) == 4.0);
    }

    TEST_CASE("unit pointwise kernel is the identity") {
        const Tensor in = random_tensor({1, 5, 4}, 3);
        const Tensor out = conv2d_same(in, Tensor::full({1, 1, 1, 1}, 1.0));
        CHECK(testutil::bit_equal(in, out));
    }

    TEST_CASE("dilated depthwise kernel spreads a delta at spacing two") {
        std::vector<double> img(25, 0.0);
        img[2 * 5 + 2] = 1.0;
        const Tensor in = Tensor::from({1, 5, 5}, img);
        const Tensor k = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
        const Tensor out = conv2d_same(in, k, 2, 1);
        // out[y][x] = sum k[a][b] * in[y + 2(a-1)][x + 2(b-1)]; the delta at (2,2)
        // lands at (2 - 2(a-1), 2 - 2(b-1)), i.e. the flipped kernel on a stride-2 grid.
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = 0; b < 3; ++b) {
                CHECK(out.at({0, 4 - 2 * a, 4 - 2 * b}) == k.data()[a * 3 + b]);
            }
        }
        double total = 0;
        for (double v : out.data()) total += v;
        CHECK(total == 45.0);
    }

    TEST_CASE("random grouped, strided, dilated convolutions match direct summation") {
        struct Case {
            std::size_t cin, cout, k, h, w;
            Conv2dOptions opt;
        };
        const std::vector<Case> cases{
            {3, 4, 3, 7, 6, {1, 1, 1, 1}}, {4, 4, 3, 8, 8, {1, 2, 2, 4}}, {4, 6, 5, 9, 7, {2, 2, 1, 2}},
            {2, 3, 1, 5, 5, {1, 0, 1, 1}}, {6, 3, 3, 6, 6, {2, 0, 1, 3}}, {2, 2, 7, 4, 4, {1, 3, 1, 1}},
        };
        std::uint64_t seed = 10;
        for (const auto& c : cases) {
            const Tensor in = random_tensor({c.cin, c.h, c.w}, seed++);
            const Tensor k = random_tensor({c.cout, c.cin / c.opt.groups, c.k, c.k}, seed++);
            const Tensor b = random_tensor({c.cout}, seed++);
            const Tensor out = conv2d(in, k, b, c.opt);
            CHECK(max_abs_diff(out.data(), naive_conv(in, k, b, c.opt)) < 1e-12);
        }
    }

    TEST_CASE("gradients match finite differences") {
        const Tensor in = random_tensor({4, 6, 5}, 1, -1, 1, true);
        const Tensor k = random_tensor({4, 2, 3, 3}, 2, -1, 1, true);
        const Tensor b = random_tensor({4}, 3, -1, 1, true);
        CHECK(fd_check([&] { return conv2d(in, k, b, {1, 2, 2, 2}); }, {in, k, b}) < 1e-4);
        CHECK(fd_check([&] { return conv2d(in, k, b, {2, 1, 1, 2}); }, {in, k, b}) < 1e-4);
    }

    TEST_CASE("channel mismatch names the dimension") {
        const Tensor in = random_tensor({3, 4, 4}, 1);
        const Tensor k = random_tensor({2, 2, 3, 3}, 2);
        try {
            conv2d_same(in, k);
            FAIL("expected an exception");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("channel") != std::string::npos);
        }
        CHECK_THROWS_AS(conv2d_same(in, random_tensor({4, 3, 3, 3}, 3), 1, 2), std::invalid_argument);
    }
}

TEST_SUITE("conv1d_depthwise") {
    TEST_CASE("unit kernel is the identity") {
        const Tensor in = random_tensor({3, 7}, 4);
        CHECK(testutil::bit_equal(conv1d_depthwise(in, Tensor::full({3, 1, 1}, 1.0)), in));
    }
    TEST_CASE("box kernel on [1,2,3] gives [3,6,5]") {
        const Tensor out = conv1d_depthwise(Tensor::from({1, 3}, {1, 2, 3}), Tensor::full({1, 1, 3}, 1.0));
        CHECK(out.data()[0] == 3.0);
        CHECK(out.data()[1] == 6.0);
        CHECK(out.data()[2] == 5.0);
    }
    TEST_CASE("kernel longer than the sequence is rejected") {
        CHECK_THROWS_AS(conv1d_depthwise(Tensor::zeros({1, 2}), Tensor::zeros({1, 1, 3})), std::invalid_argument);
    }
    TEST_CASE("gradient") {
        const Tensor in = random_tensor({3, 9}, 5, -1, 1, true);
        const Tensor k = random_tensor({3, 1, 3}, 6, -1, 1, true);
        CHECK(fd_check([&] { return conv1d_depthwise(in, k); }, {in, k}) < 1e-4);
    }
}

TEST_SUITE("layer_norm") {
    TEST_CASE("constant channel vector maps to beta") {
        const Tensor in = Tensor::full({3, 2, 2}, 0.7);
        const Tensor gamma = Tensor::from({3}, {2, 3, 4});
        const Tensor beta = Tensor::from({3}, {0.1, -0.2, 0.3});
        const Tensor out = layer_norm(in, gamma, beta);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < 4; ++i) CHECK(out.data()[c * 4 + i] == doctest::Approx(beta.data()[c]).epsilon(1e-12));
    }
    TEST_CASE("two channels [1, 3] normalise to [-1, 1]") {
        const Tensor out = layer_norm(Tensor::from({2, 1, 1}, {1, 3}), Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-12);
        CHECK(out.data()[0] == doctest::Approx(-1.0).epsilon(1e-9));
        CHECK(out.data()[1] == doctest::Approx(1.0).epsilon(1e-9));
    }
    TEST_CASE("unit variance per position on random input") {
        const Tensor in = random_tensor({16, 5, 5}, 7, -3, 5);
        const Tensor out = layer_norm(in, Tensor::full({16}, 1.0), Tensor::zeros({16}), 1e-12);
        for (std::size_t p = 0; p < 25; ++p) {
            double m = 0, v = 0;
            for (std::size_t c = 0; c < 16; ++c) m += out.data()[c * 25 + p];
            m /= 16;
            for (std::size_t c = 0; c < 16; ++c) v += (out.data()[c * 25 + p] - m) * (out.data()[c * 25 + p] - m);
            v /= 16;
            CHECK(std::abs(m) < 1e-9);
            CHECK(std::abs(v - 1.0) < 1e-6);
        }
    }
    TEST_CASE("gradient") {
        const Tensor in = random_tensor({4, 3, 3}, 8, -1, 1, true);
        const Tensor g = random_tensor({4}, 9, 0.5, 1.5, true);
        const Tensor b = random_tensor({4}, 10, -1, 1, true);
        CHECK(fd_check([&] { return layer_norm(in, g, b); }, {in, g, b}) < 1e-4);
    }
}

TEST_SUITE("softmax") {
    TEST_CASE("uniform, large and shifted inputs") {
        const Tensor a = softmax(Tensor::from({2}, {0, 0}), 0);
        CHECK(a.data()[0] == 0.5);
        const Tensor b = softmax(Tensor::from({2}, {1000, 1000}), 0);
        CHECK(b.data()[0] == 0.5);
        CHECK(b.data()[1] == 0.5);
        const Tensor x = random_tensor({3, 5}, 11, -4, 4);
        const Tensor y = softmax(add_scalar(x, 123.25), 1);
        CHECK(max_abs_diff(softmax(x, 1), y) < 1e-12);
    }
    TEST_CASE("rows are distributions") {
        const Tensor s = softmax(random_tensor({4, 6, 7}, 12, -10, 10), 2);
        for (std::size_t r = 0; r < 24; ++r) {
            double total = 0;
            for (std::size_t j = 0; j < 7; ++j) {
                const double v = s.data()[r * 7 + j];
                CHECK(v > 0.0);
                CHECK(v < 1.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
        // middle axis as well
        const Tensor m = softmax(random_tensor({3, 4, 2}, 13), 1);
        for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t c = 0; c < 2; ++c) {
                double total = 0;
                for (std::size_t b = 0; b < 4; ++b) total += m.at({a, b, c});
                CHECK(std::abs(total - 1.0) < 1e-9);
            }
    }
    TEST_CASE("gradient") {
        const Tensor x = random_tensor({3, 6}, 14, -2, 2, true);
        CHECK(fd_check([&] { return softmax(x, 1); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return softmax(x, 0); }, {x}) < 1e-4);
    }
}

TEST_SUITE("activations") {
    TEST_CASE("fixed points and limits") {
        CHECK(silu(Tensor::scalar(0.0)).item() == 0.0);
        CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
        CHECK(std::abs(silu(Tensor::scalar(20.0)).item() - 20.0) < 1e-6);
    }
    TEST_CASE("silu slope at zero is one half") {
        const Tensor x = Tensor::scalar(0.0, true);
        silu(x).backward();
        CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-15));
    }
    TEST_CASE("gradients of elementwise maps") {
        const Tensor x = random_tensor({30}, 15, -3, 3, true);
        const Tensor pos = random_tensor({30}, 16, 0.2, 3, true);
        CHECK(fd_check([&] { return silu(x); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return sigmoid(x); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return softplus(x); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return exp(x); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return log(pos); }, {pos}) < 1e-4);
        CHECK(fd_check([&] { return sqrt(pos); }, {pos}) < 1e-4);
        CHECK(fd_check([&] { return div(x, pos); }, {x, pos}) < 1e-4);
        CHECK(fd_check([&] { return mul(square(x), pos); }, {x, pos}) < 1e-4);
        CHECK(fd_check([&] { return abs(pos); }, {pos}) < 1e-4);
        CHECK(fd_check([&] { return relu(pos); }, {pos}) < 1e-4);
    }
}

TEST_SUITE("matmul") {
    TEST_CASE("identity and hand case") {
        const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
        const Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
        CHECK(testutil::bit_equal(matmul(a, eye), a));
        CHECK(testutil::bit_equal(matmul(eye, a), a));
    }
    TEST_CASE("random batched product matches the triple loop") {
        const std::size_t bt = 3, m = 4, k = 5, n = 6;
        const Tensor a = random_tensor({bt, m, k}, 17);
        const Tensor b = random_tensor({bt, k, n}, 18);
        const Tensor c = matmul(a, b);
        std::vector<double> ref(bt * m * n, 0.0);
        for (std::size_t q = 0; q < bt; ++q)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t r = 0; r < k; ++r)
                        ref[(q * m + i) * n + j] += a.data()[(q * m + i) * k + r] * b.data()[(q * k + r) * n + j];
        CHECK(max_abs_diff(c.data(), ref) < 1e-10);

        const Tensor bt_ = random_tensor({bt, n, k}, 19);
        const Tensor ct = matmul(a, bt_, true);
        std::vector<double> ref_t(bt * m * n, 0.0);
        for (std::size_t q = 0; q < bt; ++q)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    for (std::size_t r = 0; r < k; ++r)
                        ref_t[(q * m + i) * n + j] += a.data()[(q * m + i) * k + r] * bt_.data()[(q * n + j) * k + r];
        CHECK(max_abs_diff(ct.data(), ref_t) < 1e-10);
    }
    TEST_CASE("inner dimension mismatch") {
        CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), std::invalid_argument);
    }
    TEST_CASE("gradient") {
        const Tensor a = random_tensor({2, 3, 4}, 20, -1, 1, true);
        const Tensor b = random_tensor({2, 4, 5}, 21, -1, 1, true);
        const Tensor w = random_tensor({5, 4}, 22, -1, 1, true);
        CHECK(fd_check([&] { return matmul(a, b); }, {a, b}) < 1e-4);
        CHECK(fd_check([&] { return matmul(a, w, true); }, {a, w}) < 1e-4);
    }
}

TEST_SUITE("pixel shuffle") {
    TEST_CASE("inverse pair is bit exact") {
        const Tensor x = random_tensor({3, 8, 6}, 23);
        CHECK(testutil::bit_equal(pixel_shuffle(pixel_unshuffle(x, 2), 2), x));
        const Tensor y = random_tensor({12, 3, 5}, 24);
        CHECK(testutil::bit_equal(pixel_unshuffle(pixel_shuffle(y, 2), 2), y));
    }
    TEST_CASE("shapes and channel order") {
        CHECK(pixel_unshuffle(Tensor::zeros({1, 4, 4}), 2).shape() == Shape{4, 2, 2});
        const Tensor u = pixel_unshuffle(Tensor::from({1, 2, 2}, {1, 2, 3, 4}), 2);
        CHECK(u.shape() == Shape{4, 1, 1});
        CHECK(u.data()[0] == 1.0);
        CHECK(u.data()[1] == 2.0);
        CHECK(u.data()[2] == 3.0);
        CHECK(u.data()[3] == 4.0);
    }
    TEST_CASE("divisibility") {
        CHECK_THROWS_AS(pixel_unshuffle(Tensor::zeros({1, 3, 4}), 2), std::invalid_argument);
        CHECK_THROWS_AS(pixel_shuffle(Tensor::zeros({3, 2, 2}), 2), std::invalid_argument);
    }
    TEST_CASE("gradient") {
        const Tensor x = random_tensor({2, 4, 4}, 25, -1, 1, true);
        CHECK(fd_check([&] { return pixel_unshuffle(x, 2); }, {x}) < 1e-4);
        const Tensor y = random_tensor({8, 2, 3}, 26, -1, 1, true);
        CHECK(fd_check([&] { return pixel_shuffle(y, 2); }, {y}) < 1e-4);
    }
}

TEST_SUITE("gather/scatter") {
    TEST_CASE("identity and reversal") {
        const Tensor x = Tensor::from({1, 3}, {1, 2, 3});
        const std::vector<std::size_t> id{0, 1, 2}, rev{2, 1, 0};
        CHECK(testutil::bit_equal(gather_last(x, id), x));
        const Tensor r = gather_last(x, rev);
        CHECK(r.data()[0] == 3.0);
        CHECK(r.data()[2] == 1.0);
    }
    TEST_CASE("random permutation round trip is bit exact") {
        Rng rng(27);
        for (std::size_t n : {1u, 5u, 64u, 97u}) {
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
            const Tensor x = random_tensor({3, n}, 28 + n);
            CHECK(testutil::bit_equal(scatter_last(gather_last(x, perm), perm), x));
            CHECK(testutil::bit_equal(gather_last(scatter_last(x, perm), perm), x));
        }
    }
    TEST_CASE("non-permutations are rejected") {
        const Tensor x = Tensor::zeros({1, 3});
        const std::vector<std::size_t> dup{0, 0, 1}, oob{0, 1, 3}, short_{0, 1};
        CHECK_THROWS_AS(gather_last(x, dup), std::invalid_argument);
        CHECK_THROWS_AS(gather_last(x, oob), std::invalid_argument);
        CHECK_THROWS_AS(scatter_last(x, short_), std::invalid_argument);
    }
    TEST_CASE("gradient") {
        const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
        const Tensor x = random_tensor({2, 5}, 29, -1, 1, true);
        CHECK(fd_check([&] { return gather_last(x, perm); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return scatter_last(x, perm); }, {x}) < 1e-4);
    }
}

TEST_SUITE("bilinear_resize") {
    TEST_CASE("constant, same size, closed-form centre") {
        const Tensor c = bilinear_resize(Tensor::full({2, 4, 4}, 0.3), 7, 5);
        for (double v : c.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-14));
        const Tensor x = random_tensor({2, 5, 6}, 30);
        CHECK(testutil::bit_equal(bilinear_resize(x, 5, 6), x));
        const Tensor g = bilinear_resize(Tensor::from({1, 2, 2}, {0, 1, 2, 3}), 3, 3);
        CHECK(g.at({0, 1, 1}) == doctest::Approx(1.5).epsilon(1e-15));
        CHECK(g.at({0, 0, 0}) == 0.0);
        CHECK(g.at({0, 2, 2}) == 3.0);
    }
    TEST_CASE("downscaling a 48x48 grid keeps the corners") {
        const Tensor x = random_tensor({1, 48, 48}, 31);
        const Tensor y = bilinear_resize(x, 12, 12);
        CHECK(y.at({0, 0, 0}) == x.at({0, 0, 0}));
        CHECK(y.at({0, 11, 11}) == doctest::Approx(x.at({0, 47, 47})).epsilon(1e-14));
    }
    TEST_CASE("gradient") {
        const Tensor x = random_tensor({2, 4, 5}, 32, -1, 1, true);
        CHECK(fd_check([&] { return bilinear_resize(x, 7, 3); }, {x}) < 1e-4);
    }
}

TEST_SUITE("reverse mode") {
    TEST_CASE("d(x^2)/dx at 3 is 6") {
        const Tensor x = Tensor::scalar(3.0, true);
        mul(x, x).backward();
        CHECK(x.grad()[0] == 6.0);
    }
    TEST_CASE("d sum(A*B) / dA = B") {
        const Tensor a = random_tensor({3, 4}, 33, -1, 1, true);
        const Tensor b = random_tensor({3, 4}, 34);
        sum(mul(a, b)).backward();
        CHECK(max_abs_diff(a.grad(), b.data()) == 0.0);
    }
    TEST_CASE("non-scalar roots are rejected") {
        const Tensor a = random_tensor({3}, 35, -1, 1, true);
        CHECK_THROWS_AS(scale(a, 2.0).backward(), std::invalid_argument);
    }
    TEST_CASE("gradient of a sum of outputs is the sum of gradients") {
        Tensor x = random_tensor({6}, 36, -1, 1, true);
        auto f1 = [&] { return sum(mul(sigmoid(x), x)); };
        auto f2 = [&] { return sum(exp(scale(x, 0.5))); };
        x.zero_grad();
        f1().backward();
        const std::vector<double> g1(x.grad().begin(), x.grad().end());
        x.zero_grad();
        f2().backward();
        const std::vector<double> g2(x.grad().begin(), x.grad().end());
        x.zero_grad();
        add(f1(), f2()).backward();
        for (std::size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
    }
    TEST_CASE("shared subexpressions are visited once") {
        // y = s + s with s = x^3: dy/dx = 6 x^2; a double visit would give 12 x^2
        const Tensor x = Tensor::scalar(1.5, true);
        const Tensor s = mul(mul(x, x), x);
        add(s, s).backward();
        CHECK(x.grad()[0] == doctest::Approx(6 * 1.5 * 1.5).epsilon(1e-15));
    }
    TEST_CASE("no graph is recorded under NoGradGuard") {
        const Tensor x = random_tensor({3}, 37, -1, 1, true);
        NoGradGuard g;
        const Tensor y = sum(mul(x, x));
        CHECK_FALSE(y.requires_grad());
    }
    TEST_CASE("shape ops and reductions") {
        const Tensor x = random_tensor({3, 4, 5}, 38, -1, 1, true);
        const Tensor parts = random_tensor({2, 4, 5}, 39, -1, 1, true);
        CHECK(fd_check([&] { return permute(x, {2, 0, 1}); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return narrow(x, 1, 1, 2); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return select(x, 2, 3); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return concat({x, parts}, 0); }, {x, parts}) < 1e-4);
        CHECK(fd_check([&] { return stack({x, x}, 1); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return flip(x, 2); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return sum_axis(x, 1); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return mean_axis(x, 2, false); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return max_axis(x, 0); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return pad_reflect(x, 2, 3); }, {x}) < 1e-4);
        CHECK(fd_check([&] { return mean(x); }, {x}) < 1e-4);
    }
    TEST_CASE("storage is 64-bit") {
        const Tensor x = Tensor::scalar(1.0 + 1e-12);
        CHECK(x.item() != 1.0);
    }
}

#include "test_util.hpp"

#include "transmamba/attention.hpp"
#include "transmamba/params.hpp"
#include "transmamba/spectral.hpp"

using namespace transmamba;
using testutil::fd_check;
using testutil::max_abs_diff;
using testutil::random_tensor;

namespace {

struct Block {
    ModelState state;
    SdtbParams p;
};

Block make_block(std::size_t c, std::size_t heads, std::size_t bands, std::uint64_t seed = 1) {
    Block b;
    ParamInitializer init(b.state, seed);
    b.p = make_sdtb_params(init, "blk", c, heads, bands, 2.667, 48);
    return b;
}

double norm(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// Pushes every parameter of `state` away from its initial value so no path
// is trivially zero at the point of evaluation.
void perturb(ModelState& state, std::uint64_t seed, double amount = 0.3) {
    Rng rng(seed);
    for (auto& [name, t] : state.params)
        for (double& v : t.mutable_data()) v += rng.uniform(-amount, amount);
}

}  // namespace

TEST_SUITE("sbsa") {
    TEST_CASE("shape is preserved and rows are distributions") {
        Block b = make_block(4, 2, 2);
        const MeshIndex mesh = MeshIndex::build(8, 8, 2);
        AttentionProbe probe;
        const Tensor out = sbsa_forward(random_tensor({4, 8, 8}, 2), b.p, mesh, ScaleMode::heads, &probe);
        CHECK(out.shape() == Shape{4, 8, 8});
        REQUIRE(probe.maps.size() == 1);
        const Tensor& a = probe.maps[0];
        // 2 * C * b rows split across the heads, each of length HW / b
        CHECK(a.shape() == Shape{2, 8, 8});
        for (std::size_t r = 0; r < 16; ++r) {
            double s = 0;
            for (std::size_t j = 0; j < 8; ++j) {
                CHECK(a.data()[r * 8 + j] >= 0.0);
                s += a.data()[r * 8 + j];
            }
            CHECK(std::abs(s - 1.0) < 1e-9);
        }
    }

    TEST_CASE("rows count 2Cb and tokens HW/b") {
        for (std::size_t bands : {1u, 2u, 4u}) {
            Block b = make_block(4, 1, bands);
            const MeshIndex mesh = MeshIndex::build(8, 4, bands);
            AttentionProbe probe;
            sbsa_forward(random_tensor({4, 8, 4}, 3), b.p, mesh, ScaleMode::heads, &probe);
            CHECK(probe.maps[0].shape() == Shape{1, 8 * bands, 8 * bands});
        }
    }

    TEST_CASE("single band and single head match channel attention on the raw spectrum") {
        const std::size_t c = 3, h = 4, w = 6;
        Block b = make_block(c, 1, 1, 4);
        perturb(b.state, 5);
        const MeshIndex mesh = MeshIndex::build(h, w, 1);
        const Tensor x = random_tensor({c, h, w}, 6);
        AttentionProbe probe;
        const Tensor out = sbsa_forward(x, b.p, mesh, ScaleMode::heads, &probe);

        // Oracle: identical projections, but the token axis stays in natural
        // order; a column permutation leaves Q K^T unchanged.
        const Tensor qkv = conv2d_same(conv2d_same(x, b.p.qkv_pointwise), b.p.qkv_depthwise, 1, 3 * c);
        auto tokens = [&](std::size_t part) {
            return reshape(complex_to_real(fft2(narrow(qkv, 0, part * c, c))), {2 * c, h * w});
        };
        const Tensor q = tokens(0), k = tokens(1), v = tokens(2);
        const Tensor attn = softmax(matmul(q, k, true), 1);
        CHECK(max_abs_diff(reshape(probe.maps[0], {2 * c, 2 * c}), attn) < 1e-9);
        const Tensor mixed = reshape(matmul(attn, v), {2 * c, h, w});
        const Tensor expect = conv2d_same(ifft2(real_to_complex(mixed)).re(), b.p.attn_out_pointwise);
        CHECK(max_abs_diff(out, expect) < 1e-9);
    }

    TEST_CASE("token-length temperature differs from the head temperature") {
        Block b = make_block(4, 2, 2, 7);
        perturb(b.state, 8);
        const MeshIndex mesh = MeshIndex::build(8, 8, 2);
        const Tensor x = random_tensor({4, 8, 8}, 9);
        CHECK(max_abs_diff(sbsa_forward(x, b.p, mesh, ScaleMode::heads), sbsa_forward(x, b.p, mesh, ScaleMode::token_dim)) > 1e-6);
    }

    TEST_CASE("mismatched mesh is rejected") {
        Block b = make_block(4, 2, 2);
        CHECK_THROWS_AS(sbsa_forward(random_tensor({4, 8, 8}, 1), b.p, MeshIndex::build(8, 4, 2)), std::invalid_argument);
        CHECK_THROWS_AS(sbsa_forward(random_tensor({3, 8, 8}, 1), b.p, MeshIndex::build(8, 8, 2)), std::invalid_argument);
    }

    TEST_CASE("heads must divide the row count") {
        ModelState st;
        ParamInitializer init(st, 1);
        CHECK_THROWS_AS(make_sdtb_params(init, "x", 3, 4, 1, 2.667, 48), std::invalid_argument);
    }
}

TEST_SUITE("seff") {
    TEST_CASE("shape on 12x12 with the 48x48 weight") {
        Block b = make_block(4, 1, 2);
        CHECK(seff_forward(random_tensor({4, 12, 12}, 10), b.p.seff).shape() == Shape{4, 12, 12});
        CHECK(b.p.seff.hidden == seff_hidden_channels(4, 2.667));
        CHECK(seff_hidden_channels(4, 2.667) == 10);
        CHECK(seff_hidden_channels(36, 2.667) == 96);
    }

    TEST_CASE("unit spectral weights reduce to the spatial gated path") {
        Block b = make_block(4, 1, 2, 11);
        perturb(b.state, 12);
        SeffParams p = b.p.seff;
        const std::size_t hid = p.hidden;
        p.w1_re = p.w2_re = Tensor::full({hid, 48, 48}, 1.0);
        p.w1_im = p.w2_im = Tensor::zeros({hid, 48, 48});
        p.b1 = p.b2 = Tensor::zeros({hid});
        const Tensor x = random_tensor({4, 6, 10}, 13);
        const Tensor e = conv2d_same(x, p.expand_pointwise);
        const Tensor f1 = conv2d_same(narrow(e, 0, 0, hid), p.dw_plain, 1, hid);
        const Tensor f2 = conv2d_same(narrow(e, 0, hid, hid), p.dw_dilated, 2, hid);
        const Tensor expect = conv2d_same(mul(silu(f2), f1), p.out_pointwise);
        CHECK(max_abs_diff(seff_forward(x, p), expect) < 1e-10);
    }

    TEST_CASE("zero input and zero biases give zero") {
        Block b = make_block(4, 1, 2, 14);
        SeffParams p = b.p.seff;
        p.b1 = p.b2 = Tensor::zeros({p.hidden});
        const Tensor out = seff_forward(Tensor::zeros({4, 8, 8}), p);
        for (double v : out.data()) CHECK(v == 0.0);
    }
}

TEST_SUITE("sdtb") {
    TEST_CASE("zeroed output projections make the block an identity") {
        Block b = make_block(4, 2, 2, 15);
        perturb(b.state, 16);
        SdtbParams p = b.p;
        p.attn_out_pointwise = Tensor::zeros(p.attn_out_pointwise.shape());
        p.seff.out_pointwise = Tensor::zeros(p.seff.out_pointwise.shape());
        const Tensor x = random_tensor({4, 8, 8}, 17);
        CHECK(testutil::bit_equal(sdtb_forward(x, p, MeshIndex::build(8, 8, 2)), x));
    }

    TEST_CASE("gradient through one block at C=2, 4x4") {
        ModelState st;
        ParamInitializer init(st, 18);
        SdtbParams p = make_sdtb_params(init, "g", 2, 1, 2, 2.667, 6);
        perturb(st, 19, 0.2);
        const MeshIndex mesh = MeshIndex::build(4, 4, 2);
        Tensor x = random_tensor({2, 4, 4}, 20, -1, 1, true);
        std::vector<Tensor> inputs{x};
        for (auto& [name, t] : st.params) inputs.push_back(t);
        CHECK(fd_check([&] { return sdtb_forward(x, p, mesh); }, inputs, 21, 6) < 1e-4);
    }

    TEST_CASE("a corner perturbation reaches the opposite corner") {
        Block b = make_block(4, 2, 2, 22);
        perturb(b.state, 23);
        const MeshIndex mesh = MeshIndex::build(16, 16, 2);
        const Tensor x = random_tensor({4, 16, 16}, 24);
        std::vector<double> moved(x.data().begin(), x.data().end());
        moved[0] += 0.5;
        const Tensor a = sdtb_forward(x, b.p, mesh);
        const Tensor c = sdtb_forward(Tensor::from(x.shape(), moved), b.p, mesh);
        CHECK(std::abs(a.at({0, 15, 15}) - c.at({0, 15, 15})) > 0.0);
    }

    TEST_CASE("shapes across random configurations") {
        Rng rng(25);
        for (int trial = 0; trial < 8; ++trial) {
            const std::size_t c = std::size_t{2} << rng.below(3);
            const std::size_t h = 4 * (1 + rng.below(3)), w = 4 * (1 + rng.below(3));
            Block b = make_block(c, 2, 2, 26 + trial);
            const MeshIndex mesh = MeshIndex::build(h, w, 2);
            const Tensor x = random_tensor({c, h, w}, 40 + trial);
            CHECK(sbsa_forward(x, b.p, mesh).shape() == x.shape());
            CHECK(seff_forward(x, b.p.seff).shape() == x.shape());
        }
    }

    TEST_CASE("every parameter receives gradient") {
        Block b = make_block(4, 2, 2, 27);
        perturb(b.state, 28, 0.1);
        const MeshIndex mesh = MeshIndex::build(8, 8, 2);
        const Tensor x = random_tensor({4, 8, 8}, 29);
        const Tensor wts = random_tensor({4, 8, 8}, 30);
        sum(mul(sdtb_forward(x, b.p, mesh), wts)).backward();
        for (auto& [name, t] : b.state.params) {
            INFO(name);
            CHECK(t.has_grad());
            if (t.has_grad()) CHECK(norm(t.grad()) > 0.0);
        }
    }
}

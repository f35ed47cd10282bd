#include "transmamba/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

#include "transmamba/attention.hpp"
#include "transmamba/losses.hpp"
#include "transmamba/mamba.hpp"
#include "transmamba/ops.hpp"
#include "transmamba/rng.hpp"

namespace transmamba {

namespace {

// Five-point stencil: truncation error O(h^4), roundoff O(eps / h). Deep
// parameters of the micro-model have gradients near 1e-9, where roundoff at the
// fine step dominates; wider steps resolve them but may straddle a kink
// (relu, max) for strongly coupled ones. A coordinate climbs the ladder only
// while its error bound is large against the estimate, and keeps the best rung.
constexpr double kStep = 1e-5;
constexpr std::array<double, 5> kStepLadder{kStep, 1e-3, 1e-2, 3e-2, 1e-1};
constexpr double kSettledError = 1e-5;
// Roundoff bound in units of eps * |w . out|_2 / h, generous against the
// amplification observed through the network.
constexpr double kRoundoffFactor = 4.0;
constexpr std::size_t kSamplesPerTensor = 6;
constexpr std::size_t kFullSamplesPerTensor = 4;
constexpr double kComponentTolerance = 1e-4;
constexpr double kLossTolerance = 1e-6;

// A tensor-valued function reduced to a scalar by a fixed projection. An
// undefined projection means the function is already scalar.
struct Objective {
    std::function<Tensor()> f;
    Tensor projection;
};
using Named = std::vector<std::pair<std::string, Tensor>>;

Tensor random_tensor(Rng& rng, const Shape& shape, double lo, double hi) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor::from(shape, std::move(v), true);
}

Objective scalar(std::function<Tensor()> f) { return {std::move(f), Tensor()}; }

Objective projected(std::function<Tensor()> f, const Shape& out_shape, Rng& rng) {
    return {std::move(f), random_tensor(rng, out_shape, -1, 1).detach()};
}

Tensor reduce(const Objective& obj) {
    return obj.projection.defined() ? sum(mul(obj.f(), obj.projection)) : obj.f();
}

struct Estimate {
    double five_point = 0;
    double error = 0;  // |five-point - three-point| plus a roundoff bound
};

// Outputs are differenced element by element before projecting, so the
// roundoff of the projected sum itself does not enter the estimate.
Estimate estimate_at(const Objective& obj, double& slot, double h) {
    const double saved = slot;
    auto at = [&](double offset) {
        slot = saved + offset;
        const Tensor out = obj.f();
        return std::vector<double>(out.data().begin(), out.data().end());
    };
    const auto p1 = at(h), m1 = at(-h), p2 = at(2 * h), m2 = at(-2 * h);
    slot = saved;
    double five = 0, three = 0, magnitude = 0;
    for (std::size_t i = 0; i < p1.size(); ++i) {
        const double w = obj.projection.defined() ? obj.projection.data()[i] : 1.0;
        five += w * (8 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12 * h);
        three += w * (p1[i] - m1[i]) / (2 * h);
        magnitude += w * w * p1[i] * p1[i];
    }
    const double roundoff = kRoundoffFactor * std::numeric_limits<double>::epsilon() * std::sqrt(magnitude) / h;
    return {five, std::abs(five - three) + roundoff};
}

double numeric_derivative(const Objective& obj, double& slot) {
    Estimate best = estimate_at(obj, slot, kStepLadder[0]);
    for (std::size_t r = 1; r < kStepLadder.size(); ++r) {
        if (best.error <= kSettledError * std::abs(best.five_point)) break;
        const Estimate next = estimate_at(obj, slot, kStepLadder[r]);
        if (next.error < best.error) best = next;
    }
    return best.five_point;
}

void check_tensors(GradcheckReport& report, const Objective& objective, const Named& tensors, Rng& rng,
                   std::size_t samples = kSamplesPerTensor) {
    for (const auto& [name, t] : tensors) Tensor(t).zero_grad();
    reduce(objective).backward();
    for (const auto& [name, t_const] : tensors) {
        Tensor t = t_const;
        const std::size_t n = t.numel();
        std::vector<std::size_t> picks;
        if (n <= samples) {
            for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
        } else {
            while (picks.size() < samples) {
                const std::size_t i = rng.below(n);
                if (std::find(picks.begin(), picks.end(), i) == picks.end()) picks.push_back(i);
            }
        }
        const std::vector<double> analytic_all = t.has_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                                              : std::vector<double>(n, 0.0);
        double diff2 = 0, a2 = 0, n2 = 0;
        NoGradGuard no_grad;
        for (const std::size_t i : picks) {
            const double numeric = numeric_derivative(objective, t.mutable_data()[i]);
            const double analytic = analytic_all[i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            a2 += analytic * analytic;
            n2 += numeric * numeric;
        }
        const double denom = std::sqrt(a2) + std::sqrt(n2);
        const double rel = denom > 0 ? std::sqrt(diff2) / denom : 0.0;
        report.tensors.push_back({name, picks.size(), rel, std::sqrt(a2), std::sqrt(n2)});
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
}

// Every parameter of a freshly initialised module, in recording order.
Named collect(const ModelState& state) {
    Named out;
    for (const auto& [name, t] : state.params) out.emplace_back(name, t);
    return out;
}

// Perturbs freshly initialised parameters so zero/one initialisations do not
// hide errors (e.g. zero biases, unit norms).
void jitter(ModelState& state, Rng& rng) {
    for (auto& [name, t] : state.params)
        for (auto& v : t.mutable_data()) v += rng.uniform(-0.1, 0.1);
}

}  // namespace

const std::vector<std::string>& gradcheck_components() {
    static const std::vector<std::string> names{"sdtb", "seff", "sbsa", "cbsm", "ssm", "losses", "full"};
    return names;
}

bool is_gradcheck_component(const std::string& name) {
    const auto& c = gradcheck_components();
    return std::find(c.begin(), c.end(), name) != c.end();
}

GradcheckReport gradcheck(const ModelConfig& cfg, const std::string& component, std::uint64_t seed) {
    if (!is_gradcheck_component(component)) {
        throw std::invalid_argument("unknown gradcheck component '" + component +
                                    "' (expected sdtb, seff, sbsa, cbsm, ssm, losses or full)");
    }
    const auto start = std::chrono::steady_clock::now();
    GradcheckReport report;
    report.component = component;
    report.tolerance = component == "losses" ? kLossTolerance : kComponentTolerance;
    Rng rng(seed);
    ModelState state;
    ParamInitializer init(state, seed);

    if (component == "losses") {
        const Shape s{3, 8, 8};
        const Tensor pred = random_tensor(rng, s, 0, 1);
        const Tensor target = random_tensor(rng, s, 0, 1).detach();
        check_tensors(report, scalar([&] { return l1_loss(pred, target); }), {{"l1_loss/pred", pred}}, rng);
        check_tensors(report, scalar([&] { return coherence(pred, target); }), {{"coherence/pred", pred}}, rng);
        check_tensors(report, scalar([&] { return coherence_loss(pred, target); }), {{"coherence_loss/pred", pred}}, rng);
        check_tensors(report, scalar([&] { return coherence_loss(pred, target, true); }),
                      {{"coherence_loss_per_channel/pred", pred}}, rng);
        check_tensors(report, scalar([&] { return total_loss(pred, target, LossWeights{5.0, false}); }),
                      {{"total_loss/pred", pred}}, rng);
    } else if (component == "ssm") {
        const std::size_t c = 3, len = 10;
        const auto p = make_ssm_params(init, "ssm", c, 4);
        jitter(state, rng);
        const Tensor x = random_tensor(rng, {c, len}, -1, 1);
        Named named = collect(state);
        named.emplace_back("input", x);
        check_tensors(report, projected([&] { return ssm_scan(x, p); }, {c, len}, rng), named, rng);
    } else if (component == "cbsm") {
        const std::size_t c = 2;
        const auto p = make_cbsm_params(init, "cbsm", c, 3);
        jitter(state, rng);
        const Tensor x = random_tensor(rng, {c, 6, 6}, -1, 1);
        Named named = collect(state);
        named.emplace_back("input", x);
        check_tensors(report,
                      projected([&] { return cbsm_forward(x, p, cfg.flip_axis, cfg.direction_order); }, {c, 6, 6}, rng),
                      named, rng);
    } else if (component == "seff") {
        const std::size_t c = 4;
        const auto p = make_seff_params(init, "seff", c, cfg.seff_ratio, 6);
        jitter(state, rng);
        const Tensor x = random_tensor(rng, {c, 8, 8}, -1, 1);
        Named named = collect(state);
        named.emplace_back("input", x);
        check_tensors(report, projected([&] { return seff_forward(x, p); }, {c, 8, 8}, rng), named, rng);
    } else if (component == "sbsa" || component == "sdtb") {
        const std::size_t c = 4, heads = 2;
        const auto p = make_sdtb_params(init, component, c, heads, cfg.bands, cfg.seff_ratio, 6);
        jitter(state, rng);
        const auto mesh = MeshIndex::build(8, 8, cfg.bands);
        // small inputs keep the softmax away from saturation
        const Tensor x = random_tensor(rng, {c, 8, 8}, -0.2, 0.2);
        Named named;
        for (const auto& [name, t] : state.params) {
            const bool in_sbsa = name.find(".sbsa.") != std::string::npos;
            if (component == "sdtb" || in_sbsa) named.emplace_back(name, t);
        }
        named.emplace_back("input", x);
        std::function<Tensor()> f;
        if (component == "sbsa") {
            f = [&] { return sbsa_forward(x, p, mesh, cfg.scale_mode); };
        } else {
            f = [&] { return sdtb_forward(x, p, mesh, cfg.scale_mode); };
        }
        check_tensors(report, projected(f, {c, 8, 8}, rng), named, rng);
    } else {  // full
        ModelConfig micro = cfg;
        micro.base_channels = 2;
        micro.sdtb_counts.assign(cfg.levels(), 1);
        micro.cbsm_counts.assign(cfg.levels(), 1);
        micro.heads.assign(cfg.levels(), 1);
        micro.seff_weight_size = 4;
        micro.ssm_state_dim = 2;
        build_network_params(init, micro);
        jitter(state, rng);
        const Network net(micro, state);
        const std::size_t side = 2 * micro.spatial_divisor();
        const Tensor x = random_tensor(rng, {3, side, side}, 0, 1);
        Named named = collect(state);
        named.emplace_back("input", x);
        // The residual is projected directly: adding the input back and averaging
        // through a loss would bury the weakest parameter gradients in roundoff.
        check_tensors(report, projected([&] { return net.residual(x); }, {3, side, side}, rng), named, rng,
                      kFullSamplesPerTensor);
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

}  // namespace transmamba

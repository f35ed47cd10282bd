#include "transmamba/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "transmamba/gradcheck.hpp"
#include "transmamba/image_io.hpp"
#include "transmamba/losses.hpp"
#include "transmamba/network.hpp"
#include "transmamba/rain.hpp"
#include "transmamba/spectral.hpp"
#include "transmamba/train.hpp"

namespace transmamba::cli {

namespace {

// Bad user input discovered after flag parsing (config keys, ranges).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

KeyValues parse_sets(const std::vector<std::string>& sets) {
    KeyValues kv;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects KEY=VALUE, got '" + s + "'");
        std::string key = s.substr(0, eq), value = s.substr(eq + 1);
        auto trim = [](std::string& t) {
            t.erase(0, t.find_first_not_of(" \t"));
            t.erase(t.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(value);
        if (key.empty()) throw UsageError("--set with empty key: '" + s + "'");
        kv[key] = value;
    }
    return kv;
}

struct ConfigFlags {
    std::string config;
    std::string preset;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App& app, bool with_seed = true) {
        app.add_option("--config", config, "Key/value config file")->check(CLI::ExistingFile);
        app.add_option("--preset", preset, "Preset applied before the config file");
        app.add_option("--set", sets, "Override a config key: KEY=VALUE (repeatable)");
        if (with_seed) app.add_option("--seed", seed, "Random seed");
    }

    RunConfig load() const {
        KeyValues overrides = parse_sets(sets);
        if (!preset.empty()) overrides["preset"] = preset;
        if (seed) overrides["seed"] = std::to_string(*seed);
        try {
            // a --preset flag overrides a preset named inside the file
            return load_run_config(config, overrides);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f << text;
    if (!f) throw std::runtime_error("failed writing " + path.string());
}

int run_gen_data(const std::string& out_dir, std::size_t count, std::size_t size, const std::string& recipe_path,
                 std::optional<std::uint64_t> seed, std::ostream& out) {
    RainRecipe recipe;
    if (!recipe_path.empty()) {
        std::ifstream in(recipe_path);
        if (!in) throw std::runtime_error("cannot open recipe file: " + recipe_path);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            recipe.apply(parse_key_values(ss.str()));
        } catch (const std::invalid_argument& e) {
            throw UsageError(recipe_path + ": " + e.what());
        }
    }
    if (seed) recipe.seed = *seed;
    try {
        recipe.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    write_synthetic_dataset(out_dir, count, size, recipe);
    out << "wrote " << count << " pairs of " << size << "x" << size << " to " << out_dir << "/{rain,clean}\n";
    return kExitOk;
}

int run_train(const ConfigFlags& flags, const std::string& checkpoint, const std::string& log, std::ostream& out) {
    RunConfig cfg = flags.load();
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    if (!log.empty()) cfg.log = log;
    if (cfg.checkpoint.empty()) throw UsageError("train needs an output checkpoint (--checkpoint or 'checkpoint' key)");
    out << "training " << parameter_count(cfg.model) << " parameters for " << cfg.schedule.total_iters
        << " iterations (seed " << cfg.seed << ")\n";
    const std::size_t every = std::max<std::size_t>(1, cfg.log_interval);
    const auto result = train(cfg, [&](const LogEntry& e) {
        if (e.iter % every == 0 || e.iter + 1 == cfg.schedule.total_iters) {
            out << "iter " << e.iter << "  loss " << std::setprecision(6) << e.loss << "  lr " << e.lr << "\n"
                << std::flush;
        }
    });
    out << "checkpoint " << cfg.checkpoint.string() << "  checksum " << std::hex << state_checksum(result.state)
        << std::dec << "\n";
    return kExitOk;
}

int run_derain(const std::string& ckpt, const std::string& in_path, const std::string& out_path, std::ostream& out) {
    const auto [cfg, state] = load_checkpoint(ckpt);
    const Network net(cfg, state);
    const Tensor rainy = load_image(in_path);
    const Tensor clean = net.derain_image(rainy);
    save_image(out_path, clean);
    out << "derained " << rainy.size(2) << "x" << rainy.size(1) << " -> " << out_path << "\n";
    return kExitOk;
}

int run_eval(const std::string& ckpt, const std::string& data, const std::string& report, std::ostream& out) {
    const auto [cfg, state] = load_checkpoint(ckpt);
    const Network net(cfg, state);
    const std::filesystem::path root(data);
    const auto pairs = load_paired_folder(root / "rain", root / "clean");
    if (pairs.empty()) throw std::runtime_error("no image pairs under " + data);
    const EvalReport r = evaluate(net, pairs);
    const std::string text = format_report_text(r);
    out << text;
    if (!report.empty()) {
        write_text(report, text);
        write_text(report + ".jsonl", format_report_jsonl(r));
    }
    return kExitOk;
}

int run_gradcheck(const ConfigFlags& flags, const std::string& component, bool verbose, std::ostream& out) {
    std::vector<std::string> names;
    if (component == "all") {
        names = gradcheck_components();
    } else if (is_gradcheck_component(component)) {
        names = {component};
    } else {
        std::string known;
        for (const auto& n : gradcheck_components()) known += " " + n;
        throw UsageError("unknown gradcheck component '" + component + "' (known:" + known + ", all)");
    }
    const RunConfig cfg = flags.load();
    bool ok = true;
    for (const auto& name : names) {
        const GradcheckReport r = gradcheck(cfg.model, name, flags.seed.value_or(7));
        if (verbose) {
            for (const auto& t : r.tensors) {
                out << "  " << std::left << std::setw(40) << t.name << std::right << std::scientific
                    << std::setprecision(3) << " rel " << t.rel_error << "  |analytic| " << t.analytic_norm
                    << "  |numeric| " << t.numeric_norm << std::defaultfloat << "\n";
            }
        }
        out << std::left << std::setw(8) << name << std::right << " max_rel_error " << std::scientific
            << std::setprecision(3) << r.max_rel_error << "  tolerance " << r.tolerance << std::defaultfloat
            << "  tensors " << r.tensors.size() << "  " << std::fixed << std::setprecision(2) << r.seconds << "s  "
            << std::defaultfloat << (r.passed() ? "PASS" : "FAIL") << "\n";
        ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitGradcheck;
}

int run_band_swap(const std::string& rainy_path, const std::string& clean_path, std::size_t bands,
                  std::size_t total_bands, const std::string& out_path, std::ostream& out) {
    if (total_bands == 0) throw UsageError("--total-bands must be positive");
    if (bands > total_bands) {
        throw UsageError("--bands " + std::to_string(bands) + " exceeds --total-bands " + std::to_string(total_bands));
    }
    const Tensor rainy = load_image(rainy_path);
    const Tensor clean = load_image(clean_path);
    if (rainy.shape() != clean.shape()) {
        throw std::runtime_error("band-swap: image sizes differ (" + shape_str(rainy.shape()) + " vs " +
                                 shape_str(clean.shape()) + ")");
    }
    const std::size_t h = rainy.size(1), w = rainy.size(2);
    if ((h * w) % total_bands != 0) {
        throw UsageError("band-swap: " + std::to_string(h) + "x" + std::to_string(w) + " pixels do not split into " +
                         std::to_string(total_bands) + " equal bands");
    }
    const MeshIndex mesh = MeshIndex::build(h, w, total_bands);
    const Tensor swapped = band_swap(rainy, clean, mesh, bands);
    save_image(out_path, swapped);
    out << std::fixed << std::setprecision(2) << "psnr vs clean: rainy " << psnr(rainy, clean) << " dB, swapped "
        << psnr(swapped, clean) << " dB\n";
    return kExitOk;
}

int run_describe(const ConfigFlags& flags, std::ostream& out) {
    const RunConfig cfg = flags.load();
    out << format_description(cfg.model, describe(cfg.model));
    return kExitOk;
}

}  // namespace

int main(int argc, const char* const* argv) { return main(argc, argv, std::cout, std::cerr); }

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Frequency-domain transformer / state-space deraining toolkit", "transmamba"};
    app.require_subcommand(1);
    app.fallthrough(false);

    std::optional<std::uint64_t> seed;

    auto* gen = app.add_subcommand("gen-data", "Write a synthetic rain/clean dataset");
    std::string gen_out, gen_recipe;
    std::size_t gen_count = 16, gen_size = 64;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--count", gen_count, "Number of pairs")->check(CLI::PositiveNumber);
    gen->add_option("--size", gen_size, "Square image side")->check(CLI::Range(16, 4096));
    gen->add_option("--recipe", gen_recipe, "Streak recipe file (rain.* keys)")->check(CLI::ExistingFile);
    gen->add_option("--seed", seed, "Dataset seed");

    auto* tr = app.add_subcommand("train", "Train a model");
    ConfigFlags train_flags;
    std::string train_ckpt, train_log;
    train_flags.attach(*tr);
    tr->add_option("--checkpoint", train_ckpt, "Checkpoint output path");
    tr->add_option("--log", train_log, "Loss log output path");

    auto* de = app.add_subcommand("derain", "Derain one image");
    std::string de_ckpt, de_in, de_out;
    de->add_option("--ckpt", de_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    de->add_option("--in", de_in, "Input image (.png/.ppm)")->required()->check(CLI::ExistingFile);
    de->add_option("--out", de_out, "Output image (.png/.ppm)")->required();
    de->add_option("--seed", seed, "Unused; accepted for uniformity");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on DIR/{rain,clean}");
    std::string ev_ckpt, ev_data, ev_report;
    ev->add_option("--ckpt", ev_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data, "Dataset root")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--report", ev_report, "Text report path; JSON lines go to REPORT.jsonl");
    ev->add_option("--seed", seed, "Unused; accepted for uniformity");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    ConfigFlags gc_flags;
    std::string gc_component = "all";
    bool gc_verbose = false;
    gc_flags.attach(*gc);
    gc->add_option("--component", gc_component, "sdtb|seff|sbsa|cbsm|ssm|losses|full|all");
    gc->add_flag("--verbose", gc_verbose, "Per-tensor errors");

    auto* bs = app.add_subcommand("band-swap", "Replace the lowest spectral bands of a rainy image by the clean ones");
    std::string bs_rainy, bs_clean, bs_out;
    std::size_t bs_bands = 1, bs_total = 2;
    bs->add_option("--rainy", bs_rainy, "Rainy image")->required()->check(CLI::ExistingFile);
    bs->add_option("--clean", bs_clean, "Clean image")->required()->check(CLI::ExistingFile);
    bs->add_option("--bands", bs_bands, "Number of lowest bands to swap")->required();
    bs->add_option("--total-bands", bs_total, "Bands in the frequency partition");
    bs->add_option("--out", bs_out, "Output image")->required();
    bs->add_option("--seed", seed, "Unused; accepted for uniformity");

    auto* ds = app.add_subcommand("describe", "Per-level widths and parameter counts");
    ConfigFlags ds_flags;
    ds_flags.attach(*ds);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return run_gen_data(gen_out, gen_count, gen_size, gen_recipe, seed, out);
        if (*tr) return run_train(train_flags, train_ckpt, train_log, out);
        if (*de) return run_derain(de_ckpt, de_in, de_out, out);
        if (*ev) return run_eval(ev_ckpt, ev_data, ev_report, out);
        if (*gc) return run_gradcheck(gc_flags, gc_component, gc_verbose, out);
        if (*bs) return run_band_swap(bs_rainy, bs_clean, bs_bands, bs_total, bs_out, out);
        if (*ds) return run_describe(ds_flags, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace transmamba::cli

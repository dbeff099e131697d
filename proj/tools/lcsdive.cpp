#include "lcsdive/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace {

std::vector<int> parse_phases(const std::string& text)
{
    std::vector<int> phases;
    std::stringstream in(text);
    std::string token;
    while (std::getline(in, token, ',')) {
        try {
            phases.push_back(std::stoi(token));
        } catch (const std::exception&) {
            throw lcsdive::ConfigError("--phases: '" + token + "' is not a phase number");
        }
    }
    return phases;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Rule-based classification with feature tracking and subgroup discovery"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run pipeline phases from a JSON config");
    std::string config_path, phases, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    bool compaction = false, quiet = false;
    run->add_option("--config", config_path, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("--phases", phases, "Comma-separated contiguous phases, e.g. 1,2,3,4 or 2,3");
    run->add_option("--out", out_dir, "Output directory");
    run->add_option("--seed", seed, "Master seed");
    run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--compaction", compaction, "Compact fold populations before phases 3 and 4");
    run->add_flag("--quiet", quiet, "No progress output");

    auto* rep = app.add_subcommand("report", "Summarise a finished run");
    std::string report_dir;
    rep->add_option("--out", report_dir, "Output directory of the run")->required();

    auto* gen = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
    lcsdive::GeneratorSpec spec;
    std::string output = "-";
    std::uint64_t gen_seed = 0;
    std::optional<double> heritability;
    gen->add_option("kind", spec.kind, "mux, xor, univariate or hetero")
        ->required()
        ->check(CLI::IsMember({"mux", "xor", "univariate", "hetero"}));
    gen->add_option("--instances", spec.instances, "Instance count")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Seed")->capture_default_str();
    gen->add_option("--address-bits", spec.address_bits, "MUX address bits")->capture_default_str();
    gen->add_option("--features", spec.features, "Feature count (xor, univariate, hetero)")->capture_default_str();
    gen->add_option("--interacting", spec.interacting, "Interacting features for xor (2 or 3)")->capture_default_str();
    gen->add_option("--noise", spec.label_noise, "XOR label-noise probability")->capture_default_str();
    gen->add_option("--gap", spec.penetrance_gap, "Univariate penetrance gap")->capture_default_str();
    gen->add_option("--heritability", heritability, "Heritability; sets noise or gap by approximation");
    gen->add_option("--model", spec.model, "hetero sub-model kind: univariate or xor")->capture_default_str();
    gen->add_option("--models", spec.models, "hetero sub-model count")->capture_default_str();
    gen->add_option("--order", spec.order, "hetero xor order (2 or 3)")->capture_default_str();
    gen->add_option("--proportions", spec.proportions, "hetero subgroup proportions")->delimiter(',');
    gen->add_option("-o,--output", output, "Output CSV ('-' for stdout)")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            auto cfg = lcsdive::load_config(config_path);
            if (!phases.empty()) cfg.phases = parse_phases(phases);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (seed) cfg.seed = *seed;
            if (workers) cfg.workers = *workers;
            if (compaction) cfg.compaction = true;
            lcsdive::run_pipeline(cfg, quiet ? nullptr : &std::clog);
        } else if (*rep) {
            lcsdive::report(report_dir, std::cout);
        } else if (*gen) {
            spec.heritability = heritability;
            if (spec.kind == "hetero" && static_cast<int>(spec.proportions.size()) != spec.models)
                spec.proportions.assign(static_cast<std::size_t>(spec.models), 1.0 / spec.models);
            const auto ds = lcsdive::generate(spec, gen_seed);
            lcsdive::write_dataset_csv(ds, output == "-" ? "/dev/stdout" : output);
        }
    } catch (const lcsdive::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const lcsdive::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "treelearn/experiments.hpp"

using namespace treelearn;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path);
}

void print_record(const IterationRecord& r) {
#pragma omp critical(progress)
    {
        std::cerr << "  iteration " << r.iteration << " complexity " << r.complexity << " risk " << r.empirical;
        if (r.validation) std::cerr << " validation " << *r.validation;
        std::cerr << " cv " << r.corrected_loo << (r.tree_accepted ? " new tree " : " ") << r.tree.describe() << " ranks";
        for (auto k : r.ranks) std::cerr << ' ' << k;
        std::cerr << std::endl;
    }
}

void print_summary(const ExperimentReport& rep, std::ostream& os) {
    for (const auto& t : rep.trials) {
        os << "trial " << t.trial << ": test error " << t.test_error << ", squared error " << t.squared_error
           << ", cv error " << t.cv_error << ", complexity " << t.complexity << ", iterations "
           << t.records.size() << ", tree " << t.final_tree;
        if (t.optimal) os << (*t.optimal ? " (optimal)" : " (not optimal)");
        os << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Learning functions in tree tensor networks"};
    app.require_subcommand(1);

    std::string config_path, model_out, report_out;
    auto* fit = app.add_subcommand("fit", "Fit one model from a JSON experiment config");
    fit->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    fit->add_option("--model", model_out, "where to write the fitted network");
    fit->add_option("--out", report_out, "where to write the report");

    std::string function = "ii", tree = "balanced", bench_out;
    std::size_t n = 1000, trials = 10, n_test = 10000, max_iter = 0;
    std::uint64_t seed = 0;
    double noise = 0.0, validation = 0.2;
    bool no_tree_adaptation = false, verbose = false;
    auto* bench = app.add_subcommand("bench", "Run repeated adaptive fits on a synthetic function");
    bench->add_option("--function", function, "i, ii, iii, iv or v")
        ->check(CLI::IsMember({"i", "ii", "iii", "iv", "v"}));
    bench->add_option("--n", n, "sample size (validation carved from it)");
    bench->add_option("--n-test", n_test, "test sample size");
    bench->add_option("--trials", trials, "number of independent trials");
    bench->add_option("--seed", seed, "base seed");
    bench->add_option("--noise", noise, "noise standard deviation");
    bench->add_option("--tree", tree, "starting tree family")->check(CLI::IsMember({"balanced", "linear"}));
    bench->add_option("--max-iterations", max_iter, "cap on adaptation iterations");
    bench->add_option("--validation", validation, "fraction held out for model selection (0: corrected LOO)");
    bench->add_flag("--no-tree-adaptation", no_tree_adaptation, "keep the starting tree");
    bench->add_flag("--verbose", verbose, "print every iteration to stderr");
    bench->add_option("--out", bench_out, "where to write the report");

    std::string model_path;
    auto* inspect = app.add_subcommand("inspect", "Print tree, ranks and complexity of a model");
    inspect->add_option("--model", model_path, "network file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*fit) {
            auto spec = parse_spec(read_file(config_path));
            spec.trials = 1;
            const auto t0 = std::chrono::steady_clock::now();
            ExperimentReport rep;
            rep.spec = spec;
            rep.trials.push_back(run_trial(spec, 0));
            print_summary(rep, std::cout);
            std::cerr << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      << " s\n";
            if (!model_out.empty()) write_file(model_out, rep.trials[0].model.serialize());
            if (!report_out.empty()) write_file(report_out, report_json(rep));
        } else if (*bench) {
            auto spec = default_spec(parse_function(function));
            spec.n_train = n;
            spec.n_test = n_test;
            spec.trials = trials;
            spec.seed = seed;
            spec.noise = noise;
            spec.tree = tree == "linear" ? TreeKind::linear : TreeKind::balanced;
            if (max_iter) spec.adapt.max_iterations = max_iter;
            spec.adapt.tree_adaptation = !no_tree_adaptation;
            spec.adapt.validation_fraction = validation;
            if (verbose) spec.adapt.on_record = print_record;
            const auto t0 = std::chrono::steady_clock::now();
            const auto rep = run_experiment(spec);
            print_summary(rep, std::cout);
            std::cerr << "elapsed " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
                      << " s\n";
            if (!bench_out.empty()) write_file(bench_out, report_json(rep));
        } else if (*inspect) {
            const auto net = TreeTensorNetwork::parse(read_file(model_path));
            const auto& t = net.tree();
            std::cout << "tree " << t.describe() << '\n';
            std::cout << "dimension " << t.dimension() << ", nodes " << t.size() << '\n';
            std::cout << "ranks\n";
            const auto canon = t.canonical();
            for (const auto& s : canon.subsets()) std::cout << "  " << format_subset(s) << ' ' << net.rank(*t.find(s)) << '\n';
            std::cout << "complexity " << net.complexity() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

#include "treelearn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

namespace treelearn {

namespace {

double g(double a, double b) {
    double s = 0.0, p = 1.0;
    for (int i = 0; i <= 3; ++i) {
        s += p;
        p *= a * b;
    }
    return s;
}

double h(double t, double s) { return (2.0 + t * s) * (2.0 + t * s) / 9.0; }

}  // namespace

std::string function_name(FunctionId f) {
    switch (f) {
    case FunctionId::i: return "i";
    case FunctionId::ii: return "ii";
    case FunctionId::iii: return "iii";
    case FunctionId::iv: return "iv";
    case FunctionId::v: return "v";
    }
    throw std::invalid_argument("unknown function id");
}

FunctionId parse_function(const std::string& name) {
    for (auto f : {FunctionId::i, FunctionId::ii, FunctionId::iii, FunctionId::iv, FunctionId::v})
        if (function_name(f) == name) return f;
    throw std::invalid_argument("unknown function '" + name + "' (expected i, ii, iii, iv or v)");
}

std::size_t function_dimension(FunctionId f) {
    switch (f) {
    case FunctionId::i: return 6;
    case FunctionId::ii:
    case FunctionId::iii: return 10;
    case FunctionId::iv: return 16;
    case FunctionId::v: return 8;
    }
    throw std::invalid_argument("unknown function id");
}

std::size_t function_degree(FunctionId f) {
    switch (f) {
    case FunctionId::i:
    case FunctionId::iii: return 10;
    case FunctionId::ii:
    case FunctionId::iv: return 5;
    case FunctionId::v: return 8;
    }
    throw std::invalid_argument("unknown function id");
}

double test_function(FunctionId f, std::span<const double> x) {
    if (x.size() != function_dimension(f))
        throw std::invalid_argument("function " + function_name(f) + " takes " +
                                    std::to_string(function_dimension(f)) + " inputs");
    switch (f) {
    case FunctionId::i: {
        const double t = 10.0 + 2.0 * x[0] + x[2] + 2.0 * x[3] - x[4];
        return 1.0 / (t * t);
    }
    case FunctionId::ii:
    case FunctionId::iii: {
        double s = 0.0;
        for (std::size_t k = 0; k < 10; k += 2) s += g(x[k], x[k + 1]);
        return f == FunctionId::ii ? s : std::log(1.0 + s * s);
    }
    case FunctionId::iv: {
        double s = 0.0;
        for (std::size_t k = 0; k + 1 < 16; ++k) s += g(x[k], x[k + 1]);
        return s;
    }
    case FunctionId::v:
        return h(h(h(x[0], x[1]), h(x[2], x[3])), h(h(x[4], x[5]), h(x[6], x[7])));
    }
    throw std::invalid_argument("unknown function id");
}

Vector test_function(FunctionId f, const Matrix& xs) {
    Vector out(xs.rows());
    std::vector<double> row(static_cast<std::size_t>(xs.cols()));
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        for (Eigen::Index j = 0; j < xs.cols(); ++j) row[static_cast<std::size_t>(j)] = xs(i, j);
        out[i] = test_function(f, row);
    }
    return out;
}

std::optional<bool> is_optimal_tree(FunctionId f, const DimensionTree& tree) {
    switch (f) {
    case FunctionId::i: return tree.contains({0, 2, 3, 4});
    case FunctionId::ii:
    case FunctionId::iii:
        for (std::size_t k = 0; k < 10; k += 2)
            if (!tree.contains({k, k + 1})) return false;
        return true;
    case FunctionId::v: return tree.same_subsets(DimensionTree::build(TreeKind::balanced, 8));
    case FunctionId::iv: return std::nullopt;
    }
    return std::nullopt;
}

void ExperimentSpec::check() const {
    if (n_train < 2) throw std::invalid_argument("n_train must be at least 2");
    if (n_test == 0) throw std::invalid_argument("n_test must be positive");
    if (!(noise >= 0.0)) throw std::invalid_argument("noise must be nonnegative");
    if (trials == 0) throw std::invalid_argument("trials must be positive");
    if (tree == TreeKind::trivial) throw std::invalid_argument("experiments use balanced or linear trees");
    adapt.check();
}

ExperimentSpec default_spec(FunctionId f) {
    ExperimentSpec s;
    s.function = f;
    s.adapt.degree = function_degree(f);
    return s;
}

DataSet sample_data(const ExperimentSpec& spec, Rng& rng) {
    const auto d = static_cast<Eigen::Index>(function_dimension(spec.function));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> gauss;
    auto draw = [&](std::size_t n, Matrix& x, Vector& clean, Vector& noisy) {
        x.resize(static_cast<Eigen::Index>(n), d);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            for (Eigen::Index j = 0; j < d; ++j) x(i, j) = unif(rng);
        clean = test_function(spec.function, x);
        noisy = clean;
        if (spec.noise > 0.0)
            for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy[i] += spec.noise * gauss(rng);
    };
    DataSet out;
    Vector clean;
    draw(spec.n_train, out.train.inputs, clean, out.train.outputs);
    draw(spec.n_test, out.test.x, out.test_clean, out.test.y);
    if (spec.adapt.validation_fraction > 0.0)
        out.train.validation = draw_validation(spec.n_train, spec.adapt.validation_fraction, rng);
    return out;
}

TrialReport run_trial(const ExperimentSpec& spec, std::size_t trial) {
    spec.check();
    auto rng = make_rng(spec.seed, trial);
    const auto data = sample_data(spec, rng);
    const std::size_t d = function_dimension(spec.function);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), 0);
    if (spec.permute_leaves) std::shuffle(order.begin(), order.end(), rng);
    const auto start = DimensionTree::build(spec.tree, d, order);

    AdaptConfig cfg = spec.adapt;
    cfg.als.exec = kernels::Exec::parallel;
    auto fit = adaptive_fit(data.train, cfg, rng, start);

    TrialReport r;
    r.trial = trial;
    const Vector pred = evaluate(fit.net, data.test.x);
    r.test_error = risks(pred, data.test.y).relative_error;
    r.squared_error = (pred - data.test_clean).squaredNorm() / static_cast<double>(data.test_clean.size());
    const auto train = data.train.training();
    const double ref = train.y.squaredNorm() / static_cast<double>(train.size());
    const auto& best = fit.records[fit.best];
    r.cv_error = ref > 0.0 ? std::sqrt(best.corrected_loo / ref) : std::sqrt(best.corrected_loo);
    r.complexity = fit.net.complexity();
    r.start_tree = start.describe();
    r.final_tree = fit.net.tree().describe();
    for (const auto& s : fit.net.tree().subsets()) r.subsets.push_back(format_subset(s));
    r.optimal = is_optimal_tree(spec.function, fit.net.tree());
    r.records = std::move(fit.records);
    r.selected = fit.best;
    r.model = std::move(fit.net);
    return r;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.check();
    ExperimentReport rep;
    rep.spec = spec;
    rep.trials.resize(spec.trials);
    std::vector<std::exception_ptr> errors(spec.trials);
    const auto n = static_cast<long>(spec.trials);
#pragma omp parallel for schedule(dynamic, 1)
    for (long t = 0; t < n; ++t) {
        try {
            rep.trials[static_cast<std::size_t>(t)] = run_trial(spec, static_cast<std::size_t>(t));
        } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rep;
}

namespace {

using nlohmann::json;

const char* tree_kind_name(TreeKind k) {
    switch (k) {
    case TreeKind::balanced: return "balanced";
    case TreeKind::linear: return "linear";
    case TreeKind::trivial: return "trivial";
    }
    return "?";
}

TreeKind parse_tree_kind(const std::string& s) {
    if (s == "balanced") return TreeKind::balanced;
    if (s == "linear") return TreeKind::linear;
    throw std::invalid_argument("unknown tree family '" + s + "' (expected balanced or linear)");
}

json spec_to_json(const ExperimentSpec& s) {
    const auto& a = s.adapt;
    return {
        {"function", function_name(s.function)},
        {"n_train", s.n_train},
        {"n_test", s.n_test},
        {"noise", s.noise},
        {"tree", tree_kind_name(s.tree)},
        {"permute_leaves", s.permute_leaves},
        {"trials", s.trials},
        {"seed", s.seed},
        {"adapt",
         {{"theta_star", a.theta_star},
          {"gamma1", a.proposal.gamma1},
          {"gamma2", a.proposal.gamma2},
          {"gamma3", a.proposal.gamma3},
          {"max_moves", a.proposal.max_moves},
          {"max_retries", a.proposal.max_retries},
          {"tree_trials", a.tree_trials},
          {"goal", a.goal},
          {"overfit", a.overfit},
          {"max_iterations", a.max_iterations},
          {"validation_fraction", a.validation_fraction},
          {"machine_eps", a.machine_eps},
          {"tree_adaptation", a.tree_adaptation},
          {"correction_sweeps", a.correction_sweeps},
          {"max_core_entries", a.max_core_entries},
          {"degree", a.degree},
          {"als",
           {{"max_sweeps", a.als.max_sweeps},
            {"stagnation_tol", a.als.stagnation_tol},
            {"leaf_patterns", a.als.leaf_patterns}}}}},
    };
}

template <class T>
void take(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

json record_json(const IterationRecord& r) {
    json ranks = json::object();
    for (NodeId a = 0; a < r.tree.size(); ++a) ranks[format_subset(r.tree.dims(a))] = r.ranks[a];
    json j = {{"iteration", r.iteration},
              {"tree", r.tree.describe()},
              {"ranks", ranks},
              {"empirical_risk", r.empirical},
              {"corrected_loo", r.corrected_loo},
              {"complexity", r.complexity},
              {"tree_accepted", r.tree_accepted}};
    j["validation_risk"] = r.validation ? json(*r.validation) : json(nullptr);
    return j;
}

json range(const std::vector<double>& v) {
    return json::array({*std::min_element(v.begin(), v.end()), *std::max_element(v.begin(), v.end())});
}

}  // namespace

std::string spec_json(const ExperimentSpec& spec) { return spec_to_json(spec).dump(1) + "\n"; }

ExperimentSpec parse_spec(const std::string& text) {
    const auto j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    auto s = default_spec(parse_function(j.value("function", std::string("ii"))));
    take(j, "n_train", s.n_train);
    take(j, "n_test", s.n_test);
    take(j, "noise", s.noise);
    if (j.contains("tree")) s.tree = parse_tree_kind(j.at("tree").get<std::string>());
    take(j, "permute_leaves", s.permute_leaves);
    take(j, "trials", s.trials);
    take(j, "seed", s.seed);
    if (j.contains("adapt")) {
        const auto& a = j.at("adapt");
        auto& c = s.adapt;
        take(a, "theta_star", c.theta_star);
        take(a, "gamma1", c.proposal.gamma1);
        take(a, "gamma2", c.proposal.gamma2);
        take(a, "gamma3", c.proposal.gamma3);
        take(a, "max_moves", c.proposal.max_moves);
        take(a, "max_retries", c.proposal.max_retries);
        take(a, "tree_trials", c.tree_trials);
        take(a, "goal", c.goal);
        take(a, "overfit", c.overfit);
        take(a, "max_iterations", c.max_iterations);
        take(a, "validation_fraction", c.validation_fraction);
        take(a, "machine_eps", c.machine_eps);
        take(a, "tree_adaptation", c.tree_adaptation);
        take(a, "correction_sweeps", c.correction_sweeps);
        take(a, "max_core_entries", c.max_core_entries);
        take(a, "degree", c.degree);
        if (a.contains("als")) {
            const auto& l = a.at("als");
            take(l, "max_sweeps", c.als.max_sweeps);
            take(l, "stagnation_tol", c.als.stagnation_tol);
            take(l, "leaf_patterns", c.als.leaf_patterns);
        }
    }
    s.check();
    return s;
}

std::string report_json(const ExperimentReport& report) {
    json doc;
    doc["format"] = "treelearn-report";
    doc["spec"] = spec_to_json(report.spec);
    auto& trials = doc["trials"] = json::array();
    std::vector<double> test, sq, cv, cx;
    std::size_t optimal = 0, judged = 0;
    for (const auto& t : report.trials) {
        json j = {{"trial", t.trial},
                  {"test_error", t.test_error},
                  {"squared_error", t.squared_error},
                  {"cv_error", t.cv_error},
                  {"complexity", t.complexity},
                  {"start_tree", t.start_tree},
                  {"final_tree", t.final_tree},
                  {"subsets", t.subsets},
                  {"selected_iteration", t.records.empty() ? 0 : t.records[t.selected].iteration}};
        j["optimal_tree"] = t.optimal ? json(*t.optimal) : json(nullptr);
        auto& recs = j["iterations"] = json::array();
        for (const auto& r : t.records) recs.push_back(record_json(r));
        trials.push_back(std::move(j));
        test.push_back(t.test_error);
        sq.push_back(t.squared_error);
        cv.push_back(t.cv_error);
        cx.push_back(static_cast<double>(t.complexity));
        if (t.optimal) {
            ++judged;
            optimal += *t.optimal ? 1 : 0;
        }
    }
    if (!report.trials.empty()) {
        auto& s = doc["summary"];
        s["test_error"] = range(test);
        s["squared_error"] = range(sq);
        s["cv_error"] = range(cv);
        s["complexity"] = range(cx);
        s["optimal_tree_frequency"] =
            judged ? json(static_cast<double>(optimal) / static_cast<double>(judged)) : json(nullptr);
    }
    return doc.dump(1) + "\n";
}

}  // namespace treelearn

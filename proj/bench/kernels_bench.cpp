#include <benchmark/benchmark.h>

#include "treelearn/kernels.hpp"

using namespace treelearn;

namespace {

constexpr std::size_t d = 8;

Matrix points(std::size_t n) {
    auto rng = make_rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix xs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < xs.rows(); ++i)
        for (Eigen::Index j = 0; j < xs.cols(); ++j) xs(i, j) = u(rng);
    return xs;
}

TreeTensorNetwork network(std::size_t rank) {
    auto rng = make_rng(2);
    const auto tree = DimensionTree::build(TreeKind::balanced, d);
    RankMap ranks(tree.size(), rank);
    ranks[tree.root()] = 1;
    const std::vector<FeatureBasis> bases(d, FeatureBasis{BasisFamily::legendre, 8});
    return TreeTensorNetwork::random(tree, bases, ranks, rng);
}

kernels::Exec exec_of(const benchmark::State& state) {
    return state.range(1) ? kernels::Exec::parallel : kernels::Exec::serial;
}

void label(benchmark::State& state) {
    state.SetLabel(state.range(1) ? "parallel" : "serial");
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_basis_matrix(benchmark::State& state) {
    const auto xs = points(static_cast<std::size_t>(state.range(0)));
    const FeatureBasis b{BasisFamily::legendre, 8};
    for (auto _ : state) benchmark::DoNotOptimize(kernels::basis_matrix(b, xs, 0, exec_of(state)));
    label(state);
}

void BM_rowwise_kron(benchmark::State& state) {
    const auto xs = points(static_cast<std::size_t>(state.range(0)));
    const FeatureBasis b{BasisFamily::legendre, 8};
    const auto a0 = kernels::basis_matrix(b, xs, 0, kernels::Exec::serial);
    const auto a1 = kernels::basis_matrix(b, xs, 1, kernels::Exec::serial);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::rowwise_kron({&a0, &a1}, exec_of(state)));
    label(state);
}

void BM_block_product(benchmark::State& state) {
    const auto xs = points(static_cast<std::size_t>(state.range(0)));
    const FeatureBasis b{BasisFamily::legendre, 8};
    const auto a0 = kernels::basis_matrix(b, xs, 0, kernels::Exec::serial);
    const auto k = kernels::rowwise_kron({&a0, &a0}, kernels::Exec::serial);
    const Matrix c = Matrix::Random(k.cols(), 6);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::block_product(k, c, exec_of(state)));
    label(state);
}

void BM_evaluate_batch(benchmark::State& state) {
    const auto xs = points(static_cast<std::size_t>(state.range(0)));
    const auto net = network(4);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_batch(net, xs, exec_of(state)));
    label(state);
}

void BM_evaluate_pointwise(benchmark::State& state) {
    const auto xs = points(static_cast<std::size_t>(state.range(0)));
    const auto net = network(4);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::evaluate_pointwise(net, xs, exec_of(state)));
    label(state);
}

void sizes(benchmark::internal::Benchmark* b) {
    for (long n : {1000L, 10000L, 100000L})
        for (long par : {0L, 1L}) b->Args({n, par});
}

}  // namespace

BENCHMARK(BM_basis_matrix)->Apply(sizes);
BENCHMARK(BM_rowwise_kron)->Apply(sizes);
BENCHMARK(BM_block_product)->Apply(sizes);
BENCHMARK(BM_evaluate_batch)->Apply(sizes);
BENCHMARK(BM_evaluate_pointwise)->Apply(sizes);

BENCHMARK_MAIN();

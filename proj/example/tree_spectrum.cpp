// Spectrum of a distance kernel on a regular tree, split by Haar block.
// Usage: tree_spectrum [s] [depth] [beta]

#include <cstdio>
#include <cstdlib>

#include "hgeo/hgeo.hpp"

int main(int argc, char** argv) {
  const int s = argc > 1 ? std::atoi(argv[1]) : 2;
  const int depth = argc > 2 ? std::atoi(argv[2]) : 3;
  const double beta = argc > 3 ? std::atof(argv[3]) : 0.8;

  const auto tree = hgeo::build_sary_tree(s, depth);
  const auto f = hgeo::KernelSpec::exponential(1.0, beta);
  const auto blocks = hgeo::project_to_blocks(hgeo::kernel_gram(f, tree), hgeo::HaarBasis(tree));
  const auto rep = hgeo::verify_ordering(blocks, f);

  std::printf("nodes %d, kernel exp(-%.3f d)\n", tree.node_count(), beta);
  std::printf("scaling block:");
  for (Eigen::Index i = 0; i < rep.scaling_eigenvalues.size(); ++i) std::printf(" %.6f", rep.scaling_eigenvalues(i));
  std::printf("\n");
  for (std::size_t h = 0; h < rep.split_eigenvalues.size(); ++h) {
    std::printf("split block h=%zu:", h + 1);
    for (Eigen::Index i = 0; i < rep.split_eigenvalues[h].size(); ++i) std::printf(" %.6f", rep.split_eigenvalues[h](i));
    std::printf("\n");
  }
  for (const auto& c : rep.checks)
    std::printf("%-30s %s\n", c.name.c_str(), !c.applicable ? "n/a" : c.holds ? "holds" : "FAILS");
  return rep.all_hold() ? 0 : 2;
}

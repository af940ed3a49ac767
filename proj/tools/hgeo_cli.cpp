// hgeo: command-line front end for the hierarchy spectral-geometry pipeline.
//
// Exit codes: 0 success, 1 input error, 2 assumption-violation report.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <unordered_set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hgeo/experiment.hpp"
#include "hgeo/hgeo.hpp"
#include "hgeo/json_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitAssumption = 2;

/// Effective configuration of the running subcommand.
struct Echo {
  std::string toml;
  std::uint64_t seed = 0;
  bool has_seed = false;
};

Echo make_echo(const CLI::App* sub, std::optional<std::uint64_t> seed = std::nullopt) {
  Echo e;
  e.toml = "# command = " + sub->get_name() + "\n" + sub->config_to_str(true, false);
  // The seed is echoed separately only when it is not already an option line.
  if (seed && e.toml.find("\nseed=") == std::string::npos) {
    e.seed = *seed;
    e.has_seed = true;
  }
  return e;
}

void echo_csv(std::ostream& os, const Echo& e) {
  std::istringstream in(e.toml);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    os << (line.rfind("#", 0) == 0 ? line : "# " + line) << '\n';
  }
  if (e.has_seed) os << "# seed = " << e.seed << '\n';
}

json echo_json(const Echo& e) {
  json j{{"text", e.toml}};
  if (e.has_seed) j["seed"] = e.seed;
  return j;
}

void echo_sidecar(const fs::path& artifact, const Echo& e) {
  std::ofstream os(artifact.string() + ".config.toml");
  hgeo::detail::require(static_cast<bool>(os), "cannot write " + artifact.string() + ".config.toml");
  os << e.toml;
  if (e.has_seed) os << "seed = " << e.seed << '\n';
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  hgeo::detail::require(static_cast<bool>(os), "cannot write " + path.string());
  os.precision(17);
  return os;
}

std::ifstream open_in(const fs::path& path, const std::string& what) {
  std::ifstream is(path);
  hgeo::detail::require(static_cast<bool>(is), "cannot read " + what + " " + path.string());
  return is;
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

hgeo::ContractedHierarchy load_hierarchy(const std::string& path) {
  auto in = open_in(path, "hierarchy");
  return hgeo::read_hierarchy_tsv(in);
}

std::vector<std::string> load_lines(const std::string& path, const std::string& what) {
  auto in = open_in(path, what);
  return hgeo::read_vocabulary(in);
}

hgeo::KernelSpec load_kernel(const std::string& path) {
  auto in = open_in(path, "kernel");
  json j = json::parse(in, nullptr, false);
  hgeo::detail::require(!j.is_discarded(), "kernel file is not valid JSON: " + path);
  // Accept both a bare KernelSpec and a fit-kernel report.
  if (j.contains("kernel") && j["kernel"].is_object()) j = j["kernel"];
  return hgeo::kernel_from_json(j);
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      hgeo::detail::require(used == item.size(), "bad kernel value '" + item + "'");
    } catch (const std::logic_error&) {
      throw hgeo::InputError("bad kernel value '" + item + "'");
    }
  }
  return out;
}

/// Kernel from --kernel, --values, or --family/--alpha/--beta.
struct KernelArgs {
  std::string file;
  std::string family = "exponential";
  double alpha = 1.0;
  double beta = 1.0;
  std::string values;

  void add_to(CLI::App* app) {
    app->add_option("--kernel", file, "kernel JSON (a fit-kernel report is accepted)");
    app->add_option("--family", family, "exponential | shifted_power_law | tabulated")->capture_default_str();
    app->add_option("--alpha", alpha, "kernel amplitude")->capture_default_str();
    app->add_option("--beta", beta, "kernel decay rate")->capture_default_str();
    app->add_option("--values", values, "tabulated f(0),f(1),... (comma separated)");
  }
  hgeo::KernelSpec build() const {
    if (!file.empty()) return load_kernel(file);
    if (!values.empty()) return hgeo::KernelSpec::tabulated(parse_values(values));
    switch (hgeo::kernel_family_from_string(family)) {
      case hgeo::KernelFamily::Exponential: return hgeo::KernelSpec::exponential(alpha, beta);
      case hgeo::KernelFamily::ShiftedPowerLaw: return hgeo::KernelSpec::power_law(alpha, beta);
      case hgeo::KernelFamily::Tabulated: break;
    }
    throw hgeo::InputError("tabulated kernel needs --values");
  }
};

json fit_to_json(const hgeo::DecayFitResult& r) {
  json bins = json::array();
  for (const auto& b : r.bins.bins) {
    bins.push_back({{"d", b.d}, {"mean", b.mean}, {"se", b.se}, {"n_eff", b.n_eff}, {"n_raw", b.n_raw}});
  }
  json j = r.fit;
  j["bins"] = std::move(bins);
  return j;
}

void write_decay(const fs::path& path, const hgeo::DecayBins& bins, const Echo& e) {
  auto os = open_out(path);
  echo_csv(os, e);
  hgeo::write_decay_csv(os, bins);
}

/// Labels every eigenvector of a kernel Gram by the Haar block holding most of its mass.
json eigvec_figure(const hgeo::KernelSpec& kernel, const hgeo::TreeTopology& tree) {
  const hgeo::HaarBasis basis(tree);
  const Eigen::MatrixXd gram = hgeo::kernel_gram(kernel, tree);
  const hgeo::EigenSystem es = hgeo::sym_eig(gram);
  const Eigen::MatrixXd coeff = basis.matrix().transpose() * es.vectors;
  json vectors = json::array();
  for (Eigen::Index k = 0; k < es.size(); ++k) {
    double scaling = coeff.col(k).head(basis.scaling_count()).squaredNorm();
    std::vector<double> by_height(static_cast<std::size_t>(tree.depth()) + 1, 0.0);
    for (const auto& sp : basis.splits()) {
      by_height[static_cast<std::size_t>(sp.heights)] += coeff.col(k).segment(sp.offset, sp.size()).squaredNorm();
    }
    std::string label = "scaling";
    double best = scaling;
    for (std::size_t h = 1; h < by_height.size(); ++h) {
      if (by_height[h] > best) {
        best = by_height[h];
        label = "split:h=" + std::to_string(h);
      }
    }
    vectors.push_back({{"eigenvalue", es.values(k)},
                       {"block", label},
                       {"block_mass", best},
                       {"vector", hgeo::detail::vector_to_json(es.vectors.col(k))}});
  }
  json depth;
  for (int u = 0; u < tree.node_count(); ++u) depth.push_back(tree.node_depth(u));
  return json{{"kernel", kernel}, {"tree", tree}, {"node_depth", depth}, {"eigenvectors", vectors}};
}

std::vector<std::vector<int>> trees_from_json(const json& j, const hgeo::EmbeddingTable& table) {
  std::vector<std::vector<int>> out;
  auto add_tree = [&](const json& ids) {
    std::vector<int> rows;
    for (const auto& id : ids) {
      auto r = table.find(id.get<std::string>());
      hgeo::detail::require(r.has_value(), "token '" + id.get<std::string>() + "' has no embedding");
      rows.push_back(*r);
    }
    out.push_back(std::move(rows));
  };
  hgeo::detail::require(j.contains("roots"), "trees file lacks 'roots' (expected sample-trees output)");
  for (const auto& r : j["roots"]) {
    for (const auto& t : r["trees"]) add_tree(t);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hgeo: hierarchy-adapted spectral geometry of co-occurrence statistics"};
  app.set_config("--config", "", "TOML configuration file; flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  // ---------------------------------------------------------------- count
  auto* count = app.add_subcommand("count", "tokenize a corpus and write windowed co-occurrence counts (HGC1)");
  std::string corpus, corpus_format = "auto", vocab_file, out_path;
  int window = 16;
  std::size_t min_article_tokens = 500;
  count->add_option("--corpus", corpus, "text file (one article per line) or directory")->required();
  count->add_option("--corpus-format", corpus_format, "auto | lines | dir")->capture_default_str();
  count->add_option("--vocab-file", vocab_file, "one token per line; others are dropped");
  count->add_option("--window", window, "context window L")->capture_default_str();
  count->add_option("--min-article-tokens", min_article_tokens, "drop shorter articles")->capture_default_str();
  count->add_option("-o,--output", out_path, "count file")->required();

  // ---------------------------------------------------------------- mstar
  auto* mstar = app.add_subcommand("mstar", "normalized co-occurrence matrix on a token subset (JSON)");
  std::string counts_path, tokens_path, hierarchy_path;
  mstar->add_option("--counts", counts_path, "count file")->required();
  auto* mstar_tokens = mstar->add_option("--tokens", tokens_path, "token list, one per line");
  mstar->add_option("--hierarchy", hierarchy_path, "use the nodes of a contracted hierarchy")->excludes(mstar_tokens);
  mstar->add_option("-o,--output", out_path, "JSON output ('-' for stdout)");

  // ---------------------------------------------------------------- fit-kernel
  auto* fit = app.add_subcommand("fit-kernel", "fit a distance kernel to distance-binned M* means");
  std::string family = "exponential", out_dir = ".";
  int max_distance = 6;
  std::size_t pairs_per_distance = 5000;
  std::uint64_t seed = 0;
  fit->add_option("--counts", counts_path, "count file")->required();
  fit->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  fit->add_option("--family", family, "exponential | shifted_power_law")->capture_default_str();
  fit->add_option("--max-distance", max_distance, "largest distance bin")->capture_default_str();
  fit->add_option("--pairs-per-distance", pairs_per_distance, "sampled pairs per bin")->capture_default_str();
  fit->add_option("--seed", seed, "master seed")->capture_default_str();
  fit->add_option("-o,--output", out_path, "kernel report JSON ('-' for stdout)");
  fit->add_option("--out-dir", out_dir, "directory for fig2_decay.csv")->capture_default_str();

  // ---------------------------------------------------------------- hierarchy-build
  auto* hbuild = app.add_subcommand("hierarchy-build", "resolve an edge list into a rooted tree (TSV)");
  std::string edges_path, root_id;
  hbuild->add_option("--edges", edges_path, "edge TSV: child, parent[, lemma, sense count]")->required();
  hbuild->add_option("--root", root_id, "root id (inferred when unique)");
  hbuild->add_option("-o,--output", out_path, "hierarchy TSV")->required();

  // ---------------------------------------------------------------- hierarchy-contract
  auto* hcontract = app.add_subcommand("hierarchy-contract", "keep eligible nodes, re-parenting to eligible ancestors");
  std::string eligible_path;
  double min_monosemy = std::numeric_limits<double>::quiet_NaN();
  hcontract->add_option("--edges", edges_path, "edge TSV")->required();
  hcontract->add_option("--root", root_id, "root id (inferred when unique)");
  auto* elig_opt = hcontract->add_option("--eligible", eligible_path, "eligible ids, one per line");
  hcontract->add_option("--min-monosemy", min_monosemy, "eligibility threshold on the monosemy score")
      ->excludes(elig_opt);
  hcontract->add_option("-o,--output", out_path, "hierarchy TSV")->required();

  // ---------------------------------------------------------------- sample-trees
  auto* sample = app.add_subcommand("sample-trees", "count and sample perfect binary subtrees (JSON)");
  int L = 3;
  std::size_t trees_per_root = 5000;
  sample->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  sample->add_option("--L", L, "subtree depth")->capture_default_str();
  sample->add_option("--root", root_id, "only this root");
  sample->add_option("--trees-per-root", trees_per_root, "cap per root (all are listed below the cap)")
      ->capture_default_str();
  sample->add_option("--seed", seed, "master seed")->capture_default_str();
  sample->add_option("-o,--output", out_path, "JSON output ('-' for stdout)");

  // ---------------------------------------------------------------- embed
  auto* embed = app.add_subcommand("embed", "spectral embedding of M* over the count vocabulary (HGE1)");
  int dim = 2048;
  bool no_center = false, whiten = false;
  embed->add_option("--counts", counts_path, "count file")->required();
  embed->add_option("--dim", dim, "embedding dimension")->capture_default_str();
  embed->add_flag("--no-center", no_center, "keep raw rows");
  embed->add_flag("--whiten", whiten, "whiten after centering");
  embed->add_option("-o,--output", out_path, "embedding file")->required();

  // ---------------------------------------------------------------- align
  auto* align = app.add_subcommand("align", "top-k alignment of given trees against a kernel, with baselines");
  std::string embeddings_path, trees_path, nodes;
  std::size_t repeats = 1000;
  KernelArgs align_kernel;
  align->add_option("--embeddings", embeddings_path, "embedding file")->required();
  auto* trees_opt = align->add_option("--trees", trees_path, "sample-trees JSON");
  align->add_option("--nodes", nodes, "one tree: breadth-first comma-separated tokens")->excludes(trees_opt);
  align_kernel.add_to(align);
  align->add_option("--repeats", repeats, "shuffles per tree and baseline")->capture_default_str();
  align->add_option("--seed", seed, "master seed")->capture_default_str();
  align->add_option("--out-dir", out_dir, "directory for fig4_alignment.csv and alignment.json")
      ->capture_default_str();

  // ---------------------------------------------------------------- root-sweep
  auto* sweep = app.add_subcommand("root-sweep", "alignment over every eligible root of a hierarchy");
  std::size_t sweep_repeats = 1, control_permutations = 0;
  KernelArgs sweep_kernel;
  bool fit_kernel_flag = true;
  sweep->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  auto* sweep_counts = sweep->add_option("--counts", counts_path, "count file (embedding built from it)");
  sweep->add_option("--embeddings", embeddings_path, "embedding file")->excludes(sweep_counts);
  sweep->add_option("--kernel", sweep_kernel.file, "kernel JSON; fitted from the counts when absent");
  sweep->add_option("--family", family, "fit family")->capture_default_str();
  sweep->add_option("--max-distance", max_distance, "largest fit distance")->capture_default_str();
  sweep->add_option("--pairs-per-distance", pairs_per_distance, "fit pairs per bin")->capture_default_str();
  sweep->add_option("--L", L, "subtree depth")->capture_default_str();
  sweep->add_option("--trees-per-root", trees_per_root, "trees per root")->capture_default_str();
  sweep->add_option("--dim", dim, "embedding dimension when built from counts")->capture_default_str();
  sweep->add_flag("--no-center", no_center, "do not center embeddings built from counts");
  sweep->add_option("--repeats", sweep_repeats, "shuffles per tree and baseline")->capture_default_str();
  sweep->add_option("--control-permutations", control_permutations, "shuffled-input control runs (0 = off)")
      ->capture_default_str();
  sweep->add_option("--seed", seed, "master seed")->capture_default_str();
  sweep->add_option("--out-dir", out_dir, "output directory")->capture_default_str();

  // ---------------------------------------------------------------- concept-diag
  auto* concept_cmd = app.add_subcommand("concept-diag", "concept vectors and innovation cosines");
  std::string shrinkage = "ledoit-wolf";
  double intensity = 0.0, train_fraction = 0.7;
  bool no_whiten = false;
  concept_cmd->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  concept_cmd->add_option("--embeddings", embeddings_path, "embedding file")->required();
  concept_cmd->add_flag("--no-whiten", no_whiten, "center only");
  concept_cmd->add_option("--shrinkage", shrinkage, "ledoit-wolf | fixed | none")->capture_default_str();
  concept_cmd->add_option("--intensity", intensity, "fixed shrinkage intensity")->capture_default_str();
  concept_cmd->add_option("--train-fraction", train_fraction, "training share per concept")->capture_default_str();
  concept_cmd->add_option("--seed", seed, "master seed")->capture_default_str();
  concept_cmd->add_option("--out-dir", out_dir, "directory for fig5_cosines.csv")->capture_default_str();

  // ---------------------------------------------------------------- lca-decay
  auto* lca = app.add_subcommand("lca-decay", "M* decay binned by distance and LCA depth");
  lca->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  lca->add_option("--counts", counts_path, "count file")->required();
  lca->add_option("--L", L, "subtree depth")->capture_default_str();
  lca->add_option("--trees-per-root", trees_per_root, "trees per root")->capture_default_str();
  lca->add_option("--seed", seed, "master seed")->capture_default_str();
  lca->add_option("--out-dir", out_dir, "directory for fig6_lca.csv")->capture_default_str();

  // ---------------------------------------------------------------- verify-theory
  auto* verify = app.add_subcommand("verify-theory", "block structure and spectral ordering checks");
  KernelArgs verify_kernel;
  int branching = 2, depth = 3;
  std::string fig3_dir;
  verify_kernel.add_to(verify);
  verify->add_option("--s", branching, "branching factor")->capture_default_str();
  verify->add_option("--depth", depth, "tree depth L")->capture_default_str();
  verify->add_option("-o,--output", out_path, "report JSON ('-' for stdout)");
  verify->add_option("--fig3-dir", fig3_dir, "also write fig3_eigvecs.json here");

  // ---------------------------------------------------------------- synth-corpus
  auto* synth = app.add_subcommand("synth-corpus", "multinomial co-occurrence counts with a planted kernel (HGC1)");
  KernelArgs synth_kernel;
  hgeo::SyntheticConfig synth_cfg;
  synth->add_option("--hierarchy", hierarchy_path, "contracted hierarchy TSV")->required();
  synth_kernel.add_to(synth);
  synth->add_option("--pairs", synth_cfg.total_pairs, "number of co-occurrence events")->capture_default_str();
  synth->add_option("--hierarchy-mass", synth_cfg.hierarchy_mass, "marginal mass of hierarchy tokens")
      ->capture_default_str();
  synth->add_option("--background-tokens", synth_cfg.background_tokens, "tokens sharing the remaining mass")
      ->capture_default_str();
  synth->add_option("--background-prefix", synth_cfg.background_prefix, "background token name prefix")
      ->capture_default_str();
  synth->add_option("--seed", seed, "master seed")->capture_default_str();
  synth->add_option("-o,--output", out_path, "count file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*count) {
      hgeo::TokenizerConfig tcfg;
      tcfg.min_article_tokens = min_article_tokens;
      std::vector<std::string> order;
      std::unordered_set<std::string> vocab_set;
      if (!vocab_file.empty()) {
        order = load_lines(vocab_file, "vocabulary");
        vocab_set.insert(order.begin(), order.end());
        tcfg.vocabulary = &vocab_set;
      }
      const bool as_dir = corpus_format == "dir" || (corpus_format == "auto" && fs::is_directory(corpus));
      hgeo::detail::require(corpus_format == "auto" || corpus_format == "dir" || corpus_format == "lines",
                            "corpus format must be auto, lines or dir");
      hgeo::TokenStream stream;
      if (as_dir) {
        stream = hgeo::tokenize_directory(corpus, tcfg);
      } else {
        auto in = open_in(corpus, "corpus");
        stream = hgeo::tokenize_corpus(in, tcfg);
      }
      hgeo::detail::require(stream.article_count() > 0,
                            "corpus has no article with at least " + std::to_string(min_article_tokens) +
                                " retained tokens (" + std::to_string(stream.articles_seen) + " read)");
      const auto stats = hgeo::count_cooccurrence(stream, window, vocab_file.empty() ? nullptr : &order);
      hgeo::detail::require(!stats.degenerate(), "corpus produced no co-occurrence pairs");
      hgeo::write_counts(fs::path(out_path), stats);
      echo_sidecar(out_path, make_echo(count));
      std::cerr << "articles kept " << stream.article_count() << ", dropped " << stream.articles_dropped
                << ", vocabulary " << stats.vocab_size() << ", nonzeros " << stats.nnz() << '\n';
      return kExitOk;
    }

    if (*mstar) {
      const auto stats = hgeo::read_counts(fs::path(counts_path));
      std::vector<std::string> subset;
      if (!hierarchy_path.empty()) {
        subset = load_hierarchy(hierarchy_path).ids();
      } else if (!tokens_path.empty()) {
        subset = load_lines(tokens_path, "token list");
      } else {
        subset = stats.vocabulary();
      }
      const auto view = hgeo::mstar_restricted(stats, subset);
      json j{{"tokens", view.tokens},
             {"matrix", hgeo::detail::matrix_to_json(view.matrix)},
             {"unseen_pairs", view.unseen_pairs},
             {"sparsity", view.sparsity},
             {"config", echo_json(make_echo(mstar))}};
      write_json(out_path, j);
      return kExitOk;
    }

    if (*fit) {
      const auto h = load_hierarchy(hierarchy_path);
      const auto stats = hgeo::read_counts(fs::path(counts_path));
      const auto view = hgeo::hierarchy_mstar(stats, h);
      hgeo::DecayFitConfig fcfg{hgeo::kernel_family_from_string(family), max_distance, pairs_per_distance, seed};
      const auto r = hgeo::fit_kernel_from_mstar(h, view.matrix, fcfg);
      const Echo e = make_echo(fit, seed);
      json j = fit_to_json(r);
      j["config"] = echo_json(e);
      write_json(out_path, j);
      write_decay(fs::path(out_dir) / "fig2_decay.csv", r.bins, e);
      for (const auto& w : r.fit.warnings) std::cerr << "warning: " << w << '\n';
      if (!(r.fit.beta > 0.0)) {
        std::cerr << "assumption violated: fitted kernel is not decreasing (beta = " << r.fit.beta << ")\n";
        return kExitAssumption;
      }
      return kExitOk;
    }

    if (*hbuild || *hcontract) {
      auto in = open_in(edges_path, "edge list");
      const auto edges = hgeo::read_edge_tsv(in);
      const auto arb = hgeo::build_arborescence(edges, root_id);
      hgeo::ContractedHierarchy h;
      if (*hbuild) {
        h = hgeo::as_hierarchy(arb);
      } else {
        std::set<std::string> eligible;
        if (!eligible_path.empty()) {
          auto ein = open_in(eligible_path, "eligible set");
          eligible = hgeo::read_id_set(ein);
        } else {
          hgeo::detail::require(std::isfinite(min_monosemy), "give --eligible or --min-monosemy");
          eligible = hgeo::eligible_by_monosemy(edges, min_monosemy);
        }
        h = hgeo::contract(arb, eligible);
      }
      auto os = open_out(out_path);
      echo_csv(os, make_echo(*hbuild ? hbuild : hcontract));
      hgeo::write_hierarchy_tsv(os, h);
      return kExitOk;
    }

    if (*sample) {
      const auto h = load_hierarchy(hierarchy_path);
      const auto table = hgeo::count_binary_subtrees(h, L);
      std::vector<int> roots = root_id.empty() ? hgeo::eligible_roots(table) : std::vector<int>{h.index(root_id)};
      hgeo::detail::require(!roots.empty(), "no eligible roots with a depth-" + std::to_string(L) + " binary subtree");
      hgeo::SweepConfig scfg;
      scfg.L = L;
      scfg.trees_per_root = trees_per_root;
      scfg.seed = seed;
      json jroots = json::array();
      for (int r : roots) {
        std::vector<std::vector<int>> trees;
        const bool all = hgeo::select_trees(h, table, r, scfg, trees);
        json jt = json::array();
        for (const auto& t : trees) {
          json ids = json::array();
          for (int u : t) ids.push_back(h.id(u));
          jt.push_back(std::move(ids));
        }
        jroots.push_back({{"root", h.id(r)}, {"structures", table(r, L)}, {"enumerated", all}, {"trees", jt}});
      }
      json j = std::pair<const hgeo::ContractedHierarchy*, const hgeo::SubtreeCountTable*>(&h, &table);
      j["roots"] = std::move(jroots);
      j["config"] = echo_json(make_echo(sample, seed));
      write_json(out_path, j);
      return kExitOk;
    }

    if (*embed) {
      const auto stats = hgeo::read_counts(fs::path(counts_path));
      auto table = hgeo::embedding_from_counts(stats, dim, false);
      if (!no_center) table = hgeo::center_whiten(table, whiten);
      hgeo::write_embeddings(fs::path(out_path), table);
      echo_sidecar(out_path, make_echo(embed));
      return kExitOk;
    }

    if (*align) {
      const auto table = hgeo::read_embeddings(fs::path(embeddings_path));
      const auto kernel = align_kernel.build();
      std::vector<std::vector<int>> trees;
      if (!trees_path.empty()) {
        auto in = open_in(trees_path, "trees");
        const json j = json::parse(in, nullptr, false);
        hgeo::detail::require(!j.is_discarded(), "trees file is not valid JSON");
        trees = trees_from_json(j, table);
      } else {
        hgeo::detail::require(!nodes.empty(), "give --trees or --nodes");
        json ids = json::array();
        std::stringstream ss(nodes);
        std::string tok;
        while (std::getline(ss, tok, ',')) ids.push_back(tok);
        trees = trees_from_json(json{{"roots", {{{"trees", {ids}}}}}}, table);
      }
      hgeo::detail::require(!trees.empty(), "no trees to align");
      const int n = static_cast<int>(trees.front().size());
      int depth_l = 0;
      while ((2 << depth_l) - 1 < n) ++depth_l;
      hgeo::detail::require((2 << depth_l) - 1 == n, "trees must list 2^(L+1)-1 nodes breadth-first");
      const Eigen::MatrixXd theory = hgeo::kernel_gram(kernel, hgeo::build_sary_tree(2, depth_l));
      std::vector<std::vector<double>> emp, global, within;
      for (std::size_t t = 0; t < trees.size(); ++t) {
        hgeo::detail::require(static_cast<int>(trees[t].size()) == n, "trees differ in size");
        Eigen::MatrixXd w(n, table.dim());
        for (int k = 0; k < n; ++k) w.row(k) = table.rows().row(trees[t][static_cast<std::size_t>(k)]);
        emp.push_back(hgeo::topk_alignment(w * w.transpose(), theory, n).g);
        hgeo::Rng rng = hgeo::make_substream(seed, 0, t);
        for (std::size_t rep = 0; rep < repeats; ++rep) {
          within.push_back(hgeo::topk_alignment(hgeo::within_tree_shuffle(w, rng), theory, n).g);
          global.push_back(hgeo::topk_alignment(hgeo::global_shuffle(table.rows(), n, rng), theory, n).g);
        }
      }
      const auto report = hgeo::make_alignment_report("trees", n, emp, global, within);
      const Echo e = make_echo(align, seed);
      auto os = open_out(fs::path(out_dir) / "fig4_alignment.csv");
      echo_csv(os, e);
      os << hgeo::kAlignmentCsvHeader << '\n';
      hgeo::write_alignment_csv_rows(os, report);
      json j = report;
      j["config"] = echo_json(e);
      write_json((fs::path(out_dir) / "alignment.json").string(), j);
      return kExitOk;
    }

    if (*sweep) {
      hgeo::detail::require(!counts_path.empty() || !embeddings_path.empty(), "give --counts or --embeddings");
      const auto h = load_hierarchy(hierarchy_path);
      const Echo e = make_echo(sweep, seed);
      std::optional<hgeo::CooccurrenceStats> stats;
      if (!counts_path.empty()) stats = hgeo::read_counts(fs::path(counts_path));
      hgeo::KernelSpec kernel = hgeo::KernelSpec::exponential(1.0, 1.0);
      json kernel_json;
      if (!sweep_kernel.file.empty()) {
        kernel = load_kernel(sweep_kernel.file);
        kernel_json = kernel;
      } else {
        hgeo::detail::require(stats.has_value(), "without --kernel the kernel is fitted from --counts");
        hgeo::DecayFitConfig fcfg{hgeo::kernel_family_from_string(family), max_distance, pairs_per_distance, seed};
        const auto r = hgeo::fit_kernel_from_mstar(h, hgeo::hierarchy_mstar(*stats, h).matrix, fcfg);
        write_decay(fs::path(out_dir) / "fig2_decay.csv", r.bins, e);
        kernel = r.fit.kernel;
        kernel_json = fit_to_json(r);
        if (!(r.fit.beta > 0.0)) fit_kernel_flag = false;
      }
      const hgeo::EmbeddingTable table = stats ? hgeo::embedding_from_counts(*stats, dim, !no_center)
                                               : hgeo::read_embeddings(fs::path(embeddings_path));
      hgeo::SweepConfig scfg;
      scfg.L = L;
      scfg.trees_per_root = trees_per_root;
      scfg.baseline_repeats = sweep_repeats;
      scfg.seed = seed;
      const auto result = hgeo::run_root_sweep(h, table, kernel, scfg);

      auto fig = open_out(fs::path(out_dir) / "fig4_alignment.csv");
      echo_csv(fig, e);
      fig << hgeo::kAlignmentCsvHeader << '\n';
      hgeo::write_alignment_csv_rows(fig, result.pooled);

      auto curves = open_out(fs::path(out_dir) / "root_curves.csv");
      echo_csv(curves, e);
      curves << "root," << hgeo::kAlignmentCsvHeader << '\n';
      auto summary = open_out(fs::path(out_dir) / "root_sweep.csv");
      echo_csv(summary, e);
      summary << "root,structures,trees,enumerated,area_mean,area_se,global_area_mean,global_area_se,"
                 "within_area_mean,within_area_se\n";
      json jroots = json::array();
      for (const auto& r : result.roots) {
        hgeo::write_alignment_csv_rows(curves, r.report, r.root_id + ",");
        summary << r.root_id << ',' << r.structures << ',' << r.trees.size() << ',' << (r.enumerated ? 1 : 0) << ','
                << r.report.empirical.area_mean << ',' << r.report.empirical.area_se << ','
                << r.report.global_null.area_mean << ',' << r.report.global_null.area_se << ','
                << r.report.within_null.area_mean << ',' << r.report.within_null.area_se << '\n';
        jroots.push_back({{"root", r.root_id},
                          {"structures", r.structures},
                          {"trees", r.trees.size()},
                          {"enumerated", r.enumerated},
                          {"report", r.report}});
      }
      json j{{"n", result.n}, {"kernel", kernel_json}, {"pooled", result.pooled}, {"roots", jroots},
             {"config", echo_json(e)}};
      if (control_permutations > 0) {
        const auto c = hgeo::shuffled_input_control(h, table, kernel, scfg, control_permutations);
        j["shuffled_control"] = {{"permutations", c.areas.size()}, {"area_mean", c.mean}, {"area_se", c.se},
                                 {"areas", c.areas}};
      }
      write_json((fs::path(out_dir) / "root_sweep.json").string(), j);
      std::cerr << "roots " << result.roots.size() << ", pooled area " << result.pooled.empirical.area_mean
                << " +- " << result.pooled.empirical.area_se << '\n';
      if (!fit_kernel_flag) {
        std::cerr << "assumption violated: fitted kernel is not decreasing\n";
        return kExitAssumption;
      }
      return kExitOk;
    }

    if (*concept_cmd) {
      const auto h = load_hierarchy(hierarchy_path);
      const auto raw = hgeo::read_embeddings(fs::path(embeddings_path));
      const auto table = hgeo::center_whiten(raw, !no_whiten);
      hgeo::ConceptDiagnosticConfig ccfg;
      ccfg.train_fraction = train_fraction;
      ccfg.seed = seed;
      if (shrinkage == "ledoit-wolf") {
        ccfg.shrinkage.mode = hgeo::ShrinkageMode::LedoitWolf;
      } else if (shrinkage == "fixed") {
        ccfg.shrinkage.mode = hgeo::ShrinkageMode::Fixed;
        ccfg.shrinkage.intensity = intensity;
      } else if (shrinkage == "none") {
        ccfg.shrinkage.mode = hgeo::ShrinkageMode::None;
      } else {
        throw hgeo::InputError("shrinkage must be ledoit-wolf, fixed or none");
      }
      const auto records = hgeo::concept_innovations(h, table, ccfg);
      hgeo::detail::require(!records.empty(), "no parent-child pair has enough embedded descendants");
      auto os = open_out(fs::path(out_dir) / "fig5_cosines.csv");
      echo_csv(os, make_echo(concept_cmd, seed));
      hgeo::write_cosines_csv(os, records);
      return kExitOk;
    }

    if (*lca) {
      const auto h = load_hierarchy(hierarchy_path);
      const auto stats = hgeo::read_counts(fs::path(counts_path));
      const auto view = hgeo::hierarchy_mstar(stats, h);
      const auto table = hgeo::count_binary_subtrees(h, L);
      const auto roots = hgeo::eligible_roots(table);
      hgeo::detail::require(!roots.empty(), "no eligible roots with a depth-" + std::to_string(L) + " binary subtree");
      hgeo::SweepConfig scfg;
      scfg.L = L;
      scfg.trees_per_root = trees_per_root;
      scfg.seed = seed;
      std::vector<std::vector<int>> all;
      for (int r : roots) {
        std::vector<std::vector<int>> trees;
        hgeo::select_trees(h, table, r, scfg, trees);
        all.insert(all.end(), trees.begin(), trees.end());
      }
      const auto cells = hgeo::lca_conditioned_decay(all, [&](int i, int j) { return view.matrix(i, j); });
      auto os = open_out(fs::path(out_dir) / "fig6_lca.csv");
      echo_csv(os, make_echo(lca, seed));
      hgeo::write_lca_csv(os, cells);
      return kExitOk;
    }

    if (*verify) {
      const auto kernel = verify_kernel.build();
      hgeo::detail::require(branching >= 2 && depth >= 1, "need s >= 2 and depth >= 1");
      const auto tree = hgeo::build_sary_tree(branching, depth);
      const hgeo::HaarBasis basis(tree);
      const Eigen::MatrixXd gram = hgeo::kernel_gram(kernel, tree);
      const auto blocks = hgeo::project_to_blocks(gram, basis);
      const auto report = hgeo::verify_ordering(blocks, kernel);

      double closed_form_gap =
          (blocks.scaling - hgeo::scaling_block_closed_form(kernel, branching, depth)).cwiseAbs().maxCoeff();
      for (int h = 1; h <= depth; ++h) {
        const Eigen::MatrixXd diff =
            blocks.split_of_height(h).depth_block - hgeo::split_block_closed_form(kernel, branching, h);
        closed_form_gap = std::max(closed_form_gap, diff.cwiseAbs().maxCoeff());
      }
      const bool positive = kernel.positive_on(2 * depth);
      const bool decreasing = kernel.strictly_decreasing_on(2 * depth);
      json j = report;
      j["kernel"] = kernel;
      j["tree"] = tree;
      j["off_block_residual"] = blocks.off_block_residual;
      j["blocks"] = blocks;
      j["closed_form_max_abs_diff"] = closed_form_gap;
      j["assumptions"] = {{"positive", positive}, {"strictly_decreasing", decreasing}};
      if (kernel.family() == hgeo::KernelFamily::Exponential) {
        double worst = 0.0;
        for (int h = 0; h <= depth; ++h) worst = std::max(worst, hgeo::rank_one_check(kernel, branching, h));
        j["rank_one_residual"] = worst;
      }
      j["config"] = echo_json(make_echo(verify));
      write_json(out_path, j);
      if (!fig3_dir.empty()) write_json((fs::path(fig3_dir) / "fig3_eigvecs.json").string(), eigvec_figure(kernel, tree));
      for (const auto& c : report.checks) {
        std::cerr << (c.holds ? "pass " : "FAIL ") << c.name << " (min slack " << c.min_slack << ")"
                  << (c.applicable ? "" : " [assumption not met]") << '\n';
      }
      if (!positive || !decreasing || !report.all_hold()) return kExitAssumption;
      return kExitOk;
    }

    if (*synth) {
      const auto h = load_hierarchy(hierarchy_path);
      const auto kernel = synth_kernel.build();
      const std::vector<double> unigram(static_cast<std::size_t>(h.size()), 1.0);
      hgeo::Rng rng = hgeo::make_substream(seed, 7);
      const auto stats = hgeo::generate_synthetic_counts(h.distance_matrix(), h.ids(), kernel, unigram, synth_cfg, rng);
      hgeo::write_counts(fs::path(out_path), stats);
      echo_sidecar(out_path, make_echo(synth, seed));
      return kExitOk;
    }
  } catch (const hgeo::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

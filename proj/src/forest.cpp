#include "burnscan/forest.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include "burnscan/csv.hpp"
#include "burnscan/errors.hpp"
#include "burnscan/features.hpp"
#include "burnscan/rng.hpp"

namespace burnscan {

namespace {

constexpr std::uint8_t kInBag = 2;

struct Binned {
    std::size_t n_rows = 0;
    std::vector<std::vector<double>> cuts;  // per feature, ascending
    std::vector<std::uint8_t> bins;         // column-major
    std::uint8_t bin(std::size_t f, std::size_t r) const { return bins[f * n_rows + r]; }
};

std::vector<double> make_cuts(std::vector<double> values, std::size_t max_bins) {
    std::sort(values.begin(), values.end());
    std::vector<double> distinct;
    std::unique_copy(values.begin(), values.end(), std::back_inserter(distinct));
    std::vector<double> cuts;
    if (distinct.size() <= max_bins) {
        for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
            const double a = distinct[i];
            const double b = distinct[i + 1];
            double mid = a + (b - a) / 2.0;
            if (!(mid < b)) mid = a;
            cuts.push_back(mid);
        }
        return cuts;
    }
    const std::size_t n = values.size();
    for (std::size_t k = 1; k < max_bins; ++k) {
        const double v = values[k * n / max_bins];
        if (v < values.back() && (cuts.empty() || v > cuts.back())) cuts.push_back(v);
    }
    return cuts;
}

Binned bin_features(const std::vector<double>& x, std::size_t n_rows, std::size_t n_features,
                    std::size_t max_bins) {
    Binned out;
    out.n_rows = n_rows;
    out.cuts.resize(n_features);
    out.bins.resize(n_rows * n_features);
    std::vector<double> col(n_rows);
    for (std::size_t f = 0; f < n_features; ++f) {
        for (std::size_t r = 0; r < n_rows; ++r) col[r] = x[r * n_features + f];
        out.cuts[f] = make_cuts(col, max_bins);
        const auto& cuts = out.cuts[f];
        for (std::size_t r = 0; r < n_rows; ++r) {
            const auto b = std::lower_bound(cuts.begin(), cuts.end(), col[r]) - cuts.begin();
            out.bins[f * n_rows + r] = static_cast<std::uint8_t>(b);
        }
    }
    return out;
}

struct TreeResult {
    Tree tree;
    std::vector<double> importance;
    std::vector<std::uint8_t> oob_vote;  // 0/1, or kInBag
};

class TreeBuilder {
public:
    TreeBuilder(const Binned& binned, const std::vector<double>& x, const std::vector<std::uint8_t>& y,
                std::size_t n_features, const ForestParams& params, std::size_t mtry)
        : binned_(binned), x_(x), y_(y), n_features_(n_features), params_(params), mtry_(mtry) {}

    TreeResult build(std::uint64_t seed) const {
        Rng rng(seed);
        const std::size_t n = binned_.n_rows;
        std::vector<std::uint32_t> sample(n);
        std::vector<std::uint8_t> in_bag(n, 0);
        for (auto& s : sample) {
            s = static_cast<std::uint32_t>(rng.below(n));
            in_bag[s] = 1;
        }
        std::sort(sample.begin(), sample.end());

        TreeResult res;
        res.importance.assign(n_features_, 0.0);
        std::vector<std::size_t> feat(n_features_);
        std::iota(feat.begin(), feat.end(), std::size_t{0});

        struct Pending {
            std::int32_t node;
            std::size_t begin, end, depth;
        };
        std::vector<Pending> stack;
        res.tree.nodes.emplace_back();
        stack.push_back({0, 0, n, 0});
        std::array<double, 256> count{}, pos_count{};

        while (!stack.empty()) {
            const Pending p = stack.back();
            stack.pop_back();
            const double w = static_cast<double>(p.end - p.begin);
            double pos = 0.0;
            for (std::size_t i = p.begin; i < p.end; ++i) pos += y_[sample[i]];
            res.tree.nodes[p.node].p_burn = pos / w;

            const bool pure = pos == 0.0 || pos == w;
            const bool too_small = p.end - p.begin < 2 * params_.min_leaf;
            const bool too_deep = params_.max_depth > 0 && p.depth >= params_.max_depth;
            if (pure || too_small || too_deep) continue;

            const double parent = w - (pos * pos + (w - pos) * (w - pos)) / w;
            double best_gain = 1e-12;
            std::int32_t best_f = -1;
            std::size_t best_k = 0;
            for (std::size_t j = 0; j < mtry_; ++j) {
                std::swap(feat[j], feat[j + rng.below(n_features_ - j)]);
                const std::size_t f = feat[j];
                if (binned_.cuts[f].empty()) continue;
                const std::uint8_t* col = &binned_.bins[f * n];
                std::size_t lo = 255, hi = 0;
                for (std::size_t i = p.begin; i < p.end; ++i) {
                    const std::size_t b = col[sample[i]];
                    count[b] += 1.0;
                    pos_count[b] += y_[sample[i]];
                    lo = std::min(lo, b);
                    hi = std::max(hi, b);
                }
                // Only bins the node occupies can hold a cut that separates it.
                double nl = 0.0, pl = 0.0;
                for (std::size_t k = lo; k < hi; ++k) {
                    nl += count[k];
                    pl += pos_count[k];
                    const double nr = w - nl;
                    if (nl < static_cast<double>(params_.min_leaf)) continue;
                    if (nr < static_cast<double>(params_.min_leaf)) break;
                    const double pr = pos - pl;
                    const double left = nl - (pl * pl + (nl - pl) * (nl - pl)) / nl;
                    const double right = nr - (pr * pr + (nr - pr) * (nr - pr)) / nr;
                    const double gain = parent - left - right;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_f = static_cast<std::int32_t>(f);
                        best_k = k;
                    }
                }
                std::fill(count.begin() + static_cast<std::ptrdiff_t>(lo), count.begin() + static_cast<std::ptrdiff_t>(hi) + 1, 0.0);
                std::fill(pos_count.begin() + static_cast<std::ptrdiff_t>(lo),
                          pos_count.begin() + static_cast<std::ptrdiff_t>(hi) + 1, 0.0);
            }
            if (best_f < 0) continue;

            const auto f = static_cast<std::size_t>(best_f);
            const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(p.begin),
                                            sample.begin() + static_cast<std::ptrdiff_t>(p.end),
                                            [&](std::uint32_t r) { return binned_.bin(f, r) <= best_k; });
            const auto split = static_cast<std::size_t>(mid - sample.begin());
            res.importance[f] += best_gain;

            const auto left_id = static_cast<std::int32_t>(res.tree.nodes.size());
            res.tree.nodes.emplace_back();
            res.tree.nodes.emplace_back();
            auto& node = res.tree.nodes[p.node];
            node.feature = best_f;
            node.threshold = binned_.cuts[f][best_k];
            node.left = left_id;
            node.right = left_id + 1;
            stack.push_back({left_id + 1, split, p.end, p.depth + 1});
            stack.push_back({left_id, p.begin, split, p.depth + 1});
        }

        res.oob_vote.assign(n, kInBag);
        for (std::size_t r = 0; r < n; ++r) {
            if (in_bag[r]) continue;
            res.oob_vote[r] = static_cast<std::uint8_t>(leaf_of(res.tree, r).p_burn > 0.5 ? 1 : 0);
        }
        return res;
    }

private:
    const TreeNode& leaf_of(const Tree& tree, std::size_t r) const {
        const TreeNode* node = &tree.nodes[0];
        while (node->feature >= 0) {
            const double v = x_[r * n_features_ + static_cast<std::size_t>(node->feature)];
            node = &tree.nodes[static_cast<std::size_t>(v <= node->threshold ? node->left : node->right)];
        }
        return *node;
    }

    const Binned& binned_;
    const std::vector<double>& x_;
    const std::vector<std::uint8_t>& y_;
    std::size_t n_features_;
    const ForestParams& params_;
    std::size_t mtry_;
};

std::string fmt(double v) { return csv::format(v); }

}  // namespace

std::vector<double> column_medians(const TrainingData& data) {
    const std::size_t nf = data.features.size();
    std::vector<double> med(nf, 0.0);
    std::vector<double> col;
    for (std::size_t f = 0; f < nf; ++f) {
        col.clear();
        for (std::size_t r = 0; r < data.n_rows; ++r) {
            const double v = data.x[r * nf + f];
            if (!std::isnan(v)) col.push_back(v);
        }
        if (col.empty()) continue;
        const std::size_t h = col.size() / 2;
        std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(h), col.end());
        if (col.size() % 2 == 1) {
            med[f] = col[h];
        } else {
            const double hi = col[h];
            const double lo = *std::max_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(h));
            med[f] = lo + (hi - lo) / 2.0;
        }
    }
    return med;
}

ForestModel train_forest(const TrainingData& data, const ForestParams& params) {
    const std::size_t nf = data.features.size();
    if (nf == 0) throw ParameterError("training data has no features");
    if (data.x.size() != data.n_rows * nf || data.y.size() != data.n_rows) {
        throw ParameterError("training data dimensions are inconsistent");
    }
    if (params.n_trees == 0) throw ParameterError("n_trees must be > 0");
    if (params.min_leaf == 0) throw ParameterError("min_leaf must be > 0");
    if (params.max_bins < 2 || params.max_bins > 256) throw ParameterError("max_bins must be in [2, 256]");
    const auto n_pos = static_cast<std::size_t>(std::count(data.y.begin(), data.y.end(), std::uint8_t{1}));
    if (n_pos == 0 || n_pos == data.n_rows) {
        throw DegenerateModelError("training labels contain a single class");
    }
    std::size_t mtry = params.max_features;
    if (mtry == 0) mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(nf))));
    mtry = std::min(mtry, nf);

    const auto medians = column_medians(data);
    std::vector<double> x = data.x;
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        for (std::size_t f = 0; f < nf; ++f) {
            double& v = x[r * nf + f];
            if (std::isnan(v)) v = medians[f];
        }
    }
    const Binned binned = bin_features(x, data.n_rows, nf, params.max_bins);
    const TreeBuilder builder(binned, x, data.y, nf, params, mtry);

    std::vector<TreeResult> results(params.n_trees);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t = next++; t < params.n_trees; t = next++) {
            results[t] = builder.build(derive_seed(params.seed, t));
        }
    };
    unsigned n_threads = params.n_threads ? params.n_threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, params.n_trees));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }

    std::vector<double> importance(nf, 0.0);
    std::vector<std::uint32_t> votes(data.n_rows, 0), seen(data.n_rows, 0);
    std::vector<Tree> trees;
    trees.reserve(params.n_trees);
    for (auto& res : results) {
        const double total = std::accumulate(res.importance.begin(), res.importance.end(), 0.0);
        if (total > 0.0) {
            for (std::size_t f = 0; f < nf; ++f) importance[f] += res.importance[f] / total;
        }
        for (std::size_t r = 0; r < data.n_rows; ++r) {
            if (res.oob_vote[r] == kInBag) continue;
            ++seen[r];
            votes[r] += res.oob_vote[r];
        }
        trees.push_back(std::move(res.tree));
    }
    const double imp_total = std::accumulate(importance.begin(), importance.end(), 0.0);
    if (imp_total > 0.0) {
        for (auto& v : importance) v /= imp_total;
    }

    ForestModel model(data.features, medians, std::move(trees), std::move(importance), params);
    std::size_t n_oob = 0, n_correct = 0;
    for (std::size_t r = 0; r < data.n_rows; ++r) {
        if (seen[r] == 0) continue;
        ++n_oob;
        const int call = 2 * votes[r] > seen[r] ? 1 : 0;
        n_correct += call == data.y[r] ? 1 : 0;
    }
    if (n_oob > 0) model.oob_accuracy = static_cast<double>(n_correct) / static_cast<double>(n_oob);
    return model;
}

ForestModel::ForestModel(std::vector<std::string> features, std::vector<double> medians, std::vector<Tree> trees,
                         std::vector<double> importance, ForestParams params)
    : features_(std::move(features)),
      medians_(std::move(medians)),
      trees_(std::move(trees)),
      importance_(std::move(importance)),
      params_(params) {
    if (medians_.size() != features_.size() || importance_.size() != features_.size()) {
        throw SchemaError("forest schema, medians and importance differ in length");
    }
}

int ForestModel::tree_vote(std::size_t t, std::span<const double> row) const {
    if (row.size() != features_.size()) throw SchemaError("row width does not match the forest schema");
    const auto& nodes = trees_.at(t).nodes;
    const TreeNode* node = &nodes[0];
    while (node->feature >= 0) {
        const auto f = static_cast<std::size_t>(node->feature);
        const double v = std::isnan(row[f]) ? medians_[f] : row[f];
        node = &nodes[static_cast<std::size_t>(v <= node->threshold ? node->left : node->right)];
    }
    return node->p_burn > 0.5 ? 1 : 0;
}

double ForestModel::predict_score(std::span<const double> row) const {
    if (trees_.empty()) throw DegenerateModelError("forest has no trees");
    std::size_t burned = 0;
    for (std::size_t t = 0; t < trees_.size(); ++t) burned += static_cast<std::size_t>(tree_vote(t, row));
    return static_cast<double>(burned) / static_cast<double>(trees_.size());
}

std::vector<double> ForestModel::predict_table(const FeatureTable& table) const {
    std::vector<std::size_t> cols;
    std::string missing;
    for (const auto& name : features_) {
        if (auto c = table.column(name)) {
            cols.push_back(*c);
        } else {
            missing += " " + name;
        }
    }
    if (!missing.empty()) throw SchemaError("feature table lacks model features:" + missing);
    std::vector<double> scores(table.n_rows());
    std::vector<double> row(features_.size());
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        for (std::size_t f = 0; f < cols.size(); ++f) row[f] = table.at(r, cols[f]);
        scores[r] = predict_score(row);
    }
    return scores;
}

std::vector<std::string> ForestModel::ranked_features() const {
    std::vector<std::size_t> order(features_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return importance_[a] > importance_[b]; });
    std::vector<std::string> out;
    for (auto i : order) out.push_back(features_[i]);
    return out;
}

void ForestModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "burnscan-forest " << kFormatVersion << '\n';
    out << "params " << params_.n_trees << ' ' << params_.max_features << ' ' << params_.min_leaf << ' '
        << params_.max_depth << ' ' << params_.max_bins << ' ' << params_.seed << '\n';
    out << "oob " << (oob_accuracy ? fmt(*oob_accuracy) : std::string("NA")) << '\n';
    out << "features " << features_.size() << '\n';
    for (std::size_t f = 0; f < features_.size(); ++f) {
        out << features_[f] << ' ' << fmt(medians_[f]) << ' ' << fmt(importance_[f]) << '\n';
    }
    out << "trees " << trees_.size() << '\n';
    for (const auto& tree : trees_) {
        out << "tree " << tree.nodes.size() << '\n';
        for (const auto& n : tree.nodes) {
            out << n.feature << ' ' << fmt(n.threshold) << ' ' << n.left << ' ' << n.right << ' ' << fmt(n.p_burn)
                << '\n';
        }
    }
    if (!out) throw FormatError("write failed: " + path.string());
}

ForestModel ForestModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    auto fail = [&](const std::string& what) { return FormatError(path.string() + ": " + what); };
    auto expect = [&](const char* word) {
        std::string tok;
        if (!(in >> tok) || tok != word) throw fail(std::string("expected '") + word + "'");
    };
    auto read_double = [&] {
        std::string tok;
        if (!(in >> tok)) throw fail("truncated");
        return csv::parse_double(tok);
    };

    expect("burnscan-forest");
    int version = 0;
    in >> version;
    if (version != kFormatVersion) throw fail("unsupported format version " + std::to_string(version));
    ForestParams params;
    expect("params");
    in >> params.n_trees >> params.max_features >> params.min_leaf >> params.max_depth >> params.max_bins >>
        params.seed;
    expect("oob");
    const double oob = read_double();
    expect("features");
    std::size_t nf = 0;
    in >> nf;
    std::vector<std::string> names(nf);
    std::vector<double> medians(nf), importance(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        in >> names[f];
        medians[f] = read_double();
        importance[f] = read_double();
    }
    expect("trees");
    std::size_t nt = 0;
    in >> nt;
    std::vector<Tree> trees(nt);
    for (auto& tree : trees) {
        expect("tree");
        std::size_t nn = 0;
        in >> nn;
        tree.nodes.resize(nn);
        for (auto& n : tree.nodes) {
            in >> n.feature;
            n.threshold = read_double();
            in >> n.left >> n.right;
            n.p_burn = read_double();
            const auto limit = static_cast<std::int32_t>(nn);
            if (n.feature >= static_cast<std::int32_t>(nf) ||
                (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= limit || n.right >= limit))) {
                throw fail("corrupt tree node");
            }
        }
        if (!in || nn == 0) throw fail("truncated tree");
    }
    ForestModel model(std::move(names), std::move(medians), std::move(trees), std::move(importance), params);
    if (!std::isnan(oob)) model.oob_accuracy = oob;
    return model;
}

void ForestModel::write_importance_csv(const std::filesystem::path& path) const {
    std::vector<std::size_t> order(features_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return importance_[a] > importance_[b]; });
    std::vector<std::vector<std::string>> rows;
    for (auto i : order) rows.push_back({features_[i], fmt(importance_[i])});
    csv::write_rows(path, {"feature", "gini_importance"}, rows);
}

}  // namespace burnscan

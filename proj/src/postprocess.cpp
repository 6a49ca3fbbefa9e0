#include "mdmt/postprocess.hpp"

#include "mdmt/checkpoint.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>

namespace mdmt {

ElbowPoint elbow_point(std::span<const double> values)
{
    require(values.size() >= 2, "elbow detection needs at least two values");
    std::vector<double> v(values.begin(), values.end());
    for (double x : v) require(std::isfinite(x), "elbow detection needs finite values");
    std::sort(v.begin(), v.end(), std::greater<>());

    const std::size_t last = v.size() - 1;
    const double rise = v[last] - v[0];
    const double run = static_cast<double>(last);
    if (rise == 0.0) return {last, v[last]};

    // |rise * i - run * (v_i - v_0)| is the chord distance up to a constant factor.
    std::vector<double> dist(v.size());
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        dist[i] = std::abs(rise * static_cast<double>(i) - run * (v[i] - v[0]));
        best = std::max(best, dist[i]);
    }
    const double tol = 1e-12 * run * std::abs(rise);
    std::size_t knee = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (dist[i] >= best - tol) knee = i;
    return {knee, v[knee]};
}

double elbow_threshold(std::span<const double> values)
{
    return elbow_point(values).value;
}

RunSelection per_run_selection(std::span<const std::vector<double>> masks, std::vector<CellKey> runs)
{
    require(!masks.empty(), "selection needs at least one run");
    const std::size_t d = masks[0].size();
    for (const auto& m : masks) require(m.size() == d, "all masks must have the same length");
    if (runs.empty())
        for (std::size_t r = 0; r < masks.size(); ++r) runs.push_back({0, r});
    require(runs.size() == masks.size(), "run keys and masks differ in count");

    RunSelection sel;
    sel.runs = std::move(runs);
    sel.selected.resize(masks.size());
    sel.mean_abs_weight.assign(d, 0.0);

    double max_abs = 0.0;
    for (const auto& m : masks)
        for (std::size_t j = 0; j < d; ++j) {
            max_abs = std::max(max_abs, std::abs(m[j]));
            sel.mean_abs_weight[j] += std::abs(m[j]) / static_cast<double>(masks.size());
        }
    if (max_abs == 0.0) {
        sel.all_zero = true;
        return sel;
    }

    std::vector<double> pooled;
    pooled.reserve(masks.size() * d);
    for (const auto& m : masks)
        for (std::size_t j = 0; j < d; ++j) pooled.push_back(std::abs(m[j]) / max_abs);
    sel.weight_threshold = pooled.size() >= 2 ? elbow_threshold(pooled) : pooled[0];

    for (std::size_t r = 0; r < masks.size(); ++r)
        for (std::size_t j = 0; j < d; ++j)
            if (std::abs(masks[r][j]) / max_abs >= sel.weight_threshold) sel.selected[r].push_back(j);
    return sel;
}

RunSelection per_run_selection(const SweepResult& sweep)
{
    require(!sweep.runs.empty(), "sweep '" + sweep.sweep_id + "' has no successful runs");
    std::vector<std::vector<double>> masks;
    std::vector<CellKey> keys;
    for (const auto& [key, rec] : sweep.runs) {
        keys.push_back(key);
        masks.push_back(rec.final_mask);
    }
    return per_run_selection(masks, std::move(keys));
}

FeatureReport frequency_rank(const RunSelection& selection, const std::vector<std::string>& features)
{
    const std::size_t n_runs = selection.selected.size();
    require(n_runs >= 1, "frequency ranking needs at least one run");
    require(selection.mean_abs_weight.size() == features.size(),
            "selection and feature list differ in length");

    std::vector<std::size_t> counts(features.size(), 0);
    for (const auto& run : selection.selected)
        for (auto j : run) ++counts.at(j);

    FeatureReport report;
    report.universe = features;
    report.weight_threshold = selection.weight_threshold;
    report.n_runs = n_runs;
    std::vector<double> positive;
    for (std::size_t j = 0; j < features.size(); ++j) {
        const double f = static_cast<double>(counts[j]) / static_cast<double>(n_runs);
        report.ranked.push_back({features[j], j, f, selection.mean_abs_weight[j]});
        if (counts[j] > 0) positive.push_back(f);
    }
    require(!positive.empty(), "no feature was selected in any run");
    report.frequency_threshold = positive.size() >= 2 ? elbow_threshold(positive) : positive[0];

    std::sort(report.ranked.begin(), report.ranked.end(), [](const auto& a, const auto& b) {
        if (a.frequency != b.frequency) return a.frequency > b.frequency;
        if (a.mean_abs_weight != b.mean_abs_weight) return a.mean_abs_weight > b.mean_abs_weight;
        return a.id < b.id;
    });
    for (const auto& r : report.ranked)
        if (r.frequency > 0.0 && r.frequency >= report.frequency_threshold)
            report.selected.push_back(r.id);
    return report;
}

FeatureReport feature_report(const SweepResult& sweep)
{
    return frequency_rank(per_run_selection(sweep), sweep.features);
}

OverlapReports overlap_groups(const FeatureReport& across, const FeatureReport& domain_a,
                              const FeatureReport& domain_b)
{
    require(across.universe == domain_a.universe && across.universe == domain_b.universe,
            "overlap analysis needs reports over the same feature universe");
    const std::set<std::string> a(domain_a.selected.begin(), domain_a.selected.end());
    const std::set<std::string> b(domain_b.selected.begin(), domain_b.selected.end());
    const std::set<std::string> x(across.selected.begin(), across.selected.end());

    OverlapReports out;
    out.across.perspective = "across";
    for (const char* g : {"Both", "DomainA", "DomainB", "None"}) out.across.groups[g];
    for (const auto& f : across.selected) {
        const bool in_a = a.count(f) > 0, in_b = b.count(f) > 0;
        const char* g = in_a && in_b ? "Both" : in_a ? "DomainA" : in_b ? "DomainB" : "None";
        out.across.groups[g].push_back(f);
    }
    auto single = [&](const FeatureReport& r, const std::string& name) {
        OverlapReport o;
        o.perspective = name;
        o.groups["Both"];
        o.groups["DomainOnly"];
        for (const auto& f : r.selected) o.groups[x.count(f) ? "Both" : "DomainOnly"].push_back(f);
        return o;
    };
    out.single_a = single(domain_a, "single-a");
    out.single_b = single(domain_b, "single-b");
    return out;
}

PcaProjection pca_2d(const std::vector<Eigen::MatrixXd>& embeddings,
                     const std::vector<std::string>& domain_names,
                     const std::vector<std::vector<int>>& labels)
{
    require(!embeddings.empty(), "PCA needs at least one embedding matrix");
    require(embeddings.size() == domain_names.size() && embeddings.size() == labels.size(),
            "PCA inputs differ in domain count");
    const auto k = embeddings[0].cols();
    Eigen::Index n = 0;
    for (std::size_t e = 0; e < embeddings.size(); ++e) {
        require(embeddings[e].cols() == k, "embeddings differ in latent width");
        require(static_cast<std::size_t>(embeddings[e].rows()) == labels[e].size(),
                "label count differs from embedding rows");
        n += embeddings[e].rows();
    }
    require(n >= 1, "PCA needs at least one sample");

    Eigen::MatrixXd x(n, k);
    PcaProjection out;
    Eigen::Index row = 0;
    for (std::size_t e = 0; e < embeddings.size(); ++e) {
        x.middleRows(row, embeddings[e].rows()) = embeddings[e];
        row += embeddings[e].rows();
        for (Eigen::Index i = 0; i < embeddings[e].rows(); ++i) {
            out.domains.push_back(domain_names[e]);
            out.labels.push_back(labels[e][static_cast<std::size_t>(i)]);
        }
    }
    x.rowwise() -= x.colwise().mean();
    out.coords = Eigen::MatrixXd::Zero(n, 2);

    const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if (cov.trace() <= 1e-20 * scale * scale) {
        out.degenerate = true;
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const auto& values = solver.eigenvalues();  // ascending
    for (int c = 0; c < 2 && c < k; ++c) {
        const Eigen::Index idx = k - 1 - c;
        Eigen::VectorXd axis = solver.eigenvectors().col(idx);
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis(arg) < 0) axis = -axis;
        out.coords.col(c) = x * axis;
        out.variance[static_cast<std::size_t>(c)] = std::max(0.0, values(idx));
    }
    return out;
}

PcaProjection latent_pca(const Checkpoint& checkpoint, const PairedDomainData& data)
{
    const auto model = from_checkpoint<double>(checkpoint);
    std::vector<Eigen::MatrixXd> emb;
    std::vector<std::string> names;
    std::vector<std::vector<int>> labels;
    emb.push_back(embed(model, 0, data.domain_a));
    names.push_back(data.domain_a.domain_id);
    labels.push_back(data.domain_a.labels);
    if (model.params.vaes.size() == 2) {
        emb.push_back(embed(model, 1, data.domain_b));
        names.push_back(data.domain_b.domain_id);
        labels.push_back(data.domain_b.labels);
    }
    return pca_2d(emb, names, labels);
}

RecoveryStats recovery(const std::vector<std::string>& selected, const std::vector<std::string>& truth)
{
    const std::set<std::string> t(truth.begin(), truth.end());
    RecoveryStats s;
    for (const auto& f : selected) s.true_positives += t.count(f);
    s.recall = t.empty() ? 1.0 : static_cast<double>(s.true_positives) / static_cast<double>(t.size());
    s.precision = selected.empty()
                      ? 0.0
                      : static_cast<double>(s.true_positives) / static_cast<double>(selected.size());
    return s;
}

void write_feature_report(const FeatureReport& report, const std::filesystem::path& csv,
                          const std::filesystem::path& summary_json)
{
    std::ofstream out(csv);
    if (!out) throw Error("cannot write '" + csv.string() + "'");
    out << "rank,feature,frequency,mean_abs_weight,selected\n" << std::setprecision(10);
    const std::set<std::string> chosen(report.selected.begin(), report.selected.end());
    for (std::size_t r = 0; r < report.ranked.size(); ++r) {
        const auto& f = report.ranked[r];
        out << r + 1 << ',' << f.id << ',' << f.frequency << ',' << f.mean_abs_weight << ','
            << (chosen.count(f.id) ? 1 : 0) << '\n';
    }

    nlohmann::json j;
    j["n_runs"] = report.n_runs;
    j["n_features"] = report.universe.size();
    j["weight_threshold"] = report.weight_threshold;
    j["frequency_threshold"] = report.frequency_threshold;
    j["n_selected"] = report.selected.size();
    j["selected"] = report.selected;
    std::ofstream js(summary_json);
    if (!js) throw Error("cannot write '" + summary_json.string() + "'");
    js << j.dump(2) << '\n';
}

void write_overlap_report(const OverlapReport& report, const FeatureReport& source,
                          const std::filesystem::path& csv)
{
    std::map<std::string, double> freq;
    for (const auto& r : source.ranked) freq[r.id] = r.frequency;
    std::ofstream out(csv);
    if (!out) throw Error("cannot write '" + csv.string() + "'");
    out << "group,feature,frequency\n" << std::setprecision(10);
    for (const auto& [group, ids] : report.groups)
        for (const auto& id : ids) out << group << ',' << id << ',' << freq[id] << '\n';
}

void write_pca_table(const PcaProjection& pca, const std::filesystem::path& csv)
{
    std::ofstream out(csv);
    if (!out) throw Error("cannot write '" + csv.string() + "'");
    out << "domain,class,pc1,pc2\n" << std::setprecision(10);
    for (Eigen::Index i = 0; i < pca.coords.rows(); ++i)
        out << pca.domains[static_cast<std::size_t>(i)] << ',' << pca.labels[static_cast<std::size_t>(i)]
            << ',' << pca.coords(i, 0) << ',' << pca.coords(i, 1) << '\n';
}

} // namespace mdmt

#include "fallacy/evalreport.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>

#include "fallacy/errors.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

using nlohmann::json;

json Metrics::to_json() const {
    return {{"accuracy", accuracy}, {"precision", precision}, {"recall", recall}, {"f1", f1}};
}

Metrics Metrics::from_json(const json& j) {
    return {j.at("accuracy").get<double>(), j.at("precision").get<double>(),
            j.at("recall").get<double>(), j.at("f1").get<double>()};
}

namespace {

LabelSpace resolve_labels(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                          const LabelSpace& labels) {
    if (gold.size() != pred.size())
        throw LengthMismatch("gold has " + std::to_string(gold.size()) + " labels, predictions " +
                             std::to_string(pred.size()));
    if (gold.empty()) throw LengthMismatch("label sequences are empty");
    if (!labels.empty()) {
        for (const auto* seq : {&gold, &pred})
            for (const auto& l : *seq)
                if (!labels.contains(l)) throw UnknownLabel("'" + l + "' is outside the label space");
        return labels;
    }
    std::set<std::string> all(gold.begin(), gold.end());
    all.insert(pred.begin(), pred.end());
    return LabelSpace(std::vector<std::string>(all.begin(), all.end()));
}

}  // namespace

std::vector<ClassScore> per_class_scores(const std::vector<std::string>& gold,
                                         const std::vector<std::string>& pred,
                                         const LabelSpace& labels) {
    const LabelSpace space = resolve_labels(gold, pred, labels);
    std::vector<std::size_t> tp(space.size(), 0), gold_n(space.size(), 0), pred_n(space.size(), 0);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto g = space.index(gold[i]);
        const auto p = space.index(pred[i]);
        ++gold_n[g];
        ++pred_n[p];
        if (g == p) ++tp[g];
    }
    std::vector<ClassScore> out;
    for (std::size_t c = 0; c < space.size(); ++c) {
        ClassScore s;
        s.label = space.name(c);
        s.support = gold_n[c];
        s.precision = pred_n[c] ? static_cast<double>(tp[c]) / static_cast<double>(pred_n[c]) : 0.0;
        s.recall = gold_n[c] ? static_cast<double>(tp[c]) / static_cast<double>(gold_n[c]) : 0.0;
        s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        out.push_back(std::move(s));
    }
    return out;
}

Metrics weighted_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                         const LabelSpace& labels) {
    const auto scores = per_class_scores(gold, pred, labels);
    Metrics m;
    const auto n = static_cast<double>(gold.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) correct += gold[i] == pred[i];
    m.accuracy = static_cast<double>(correct) / n;
    for (const auto& s : scores) {
        const double w = static_cast<double>(s.support) / n;
        m.precision += w * s.precision;
        m.recall += w * s.recall;
        m.f1 += w * s.f1;
    }
    return m;
}

double sample_stddev(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

EvalReport make_report(Granularity task, std::string dataset, std::string method, LabelSpace labels,
                       const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                       std::uint64_t seed, const std::map<std::string, std::size_t>& train_counts) {
    EvalReport r;
    r.task = task;
    r.dataset = std::move(dataset);
    r.method = std::move(method);
    r.labels = std::move(labels);
    RunRecord run;
    run.seed = seed;
    run.metrics = weighted_metrics(gold, pred, r.labels);
    for (const auto& s : per_class_scores(gold, pred, r.labels)) {
        run.per_class_f1[s.label] = s.f1;
        auto it = train_counts.find(s.label);
        r.per_class.push_back({s.label, s.f1, it == train_counts.end() ? 0 : it->second, s.support});
    }
    r.runs.push_back(std::move(run));
    r.mean = r.runs.front().metrics;
    return r;
}

EvalReport aggregate_runs(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw HeterogeneousReports("no reports to aggregate");
    const auto& first = reports.front();
    EvalReport out;
    out.task = first.task;
    out.dataset = first.dataset;
    out.method = first.method;
    out.labels = first.labels;
    out.out_of_domain = first.out_of_domain;
    out.extra = first.extra;
    for (const auto& r : reports) {
        if (r.task != first.task || r.dataset != first.dataset || r.method != first.method ||
            !(r.labels == first.labels) || r.out_of_domain != first.out_of_domain)
            throw HeterogeneousReports("cannot aggregate " + r.method + "/" + r.dataset + "/" +
                                       std::string(to_string(r.task)) + " with " + first.method +
                                       "/" + first.dataset + "/" +
                                       std::string(to_string(first.task)));
        out.runs.insert(out.runs.end(), r.runs.begin(), r.runs.end());
        out.explanations.insert(out.explanations.end(), r.explanations.begin(), r.explanations.end());
    }
    auto collect = [&](auto getter) {
        std::vector<double> xs;
        for (const auto& run : out.runs) xs.push_back(getter(run.metrics));
        double mean = 0;
        for (double x : xs) mean += x;
        return std::pair{mean / static_cast<double>(xs.size()), sample_stddev(xs)};
    };
    std::tie(out.mean.accuracy, out.stddev.accuracy) = collect([](const Metrics& m) { return m.accuracy; });
    std::tie(out.mean.precision, out.stddev.precision) = collect([](const Metrics& m) { return m.precision; });
    std::tie(out.mean.recall, out.stddev.recall) = collect([](const Metrics& m) { return m.recall; });
    std::tie(out.mean.f1, out.stddev.f1) = collect([](const Metrics& m) { return m.f1; });

    for (const auto& label : out.labels.names()) {
        PerClassRow row{label, 0.0, 0, 0};
        double sum = 0;
        for (const auto& run : out.runs) {
            auto it = run.per_class_f1.find(label);
            sum += it == run.per_class_f1.end() ? 0.0 : it->second;
        }
        row.f1 = sum / static_cast<double>(out.runs.size());
        for (const auto& pc : first.per_class)
            if (pc.label == label) {
                row.train_count = pc.train_count;
                row.test_count = pc.test_count;
            }
        out.per_class.push_back(row);
    }
    return out;
}

json EvalReport::to_json() const {
    json runs_j = json::array();
    for (const auto& r : runs)
        runs_j.push_back({{"seed", r.seed},
                          {"metrics", r.metrics.to_json()},
                          {"per_class_f1", r.per_class_f1},
                          {"epoch_seconds", r.epoch_seconds}});
    json pc = json::array();
    for (const auto& p : per_class)
        pc.push_back({{"label", p.label}, {"f1", p.f1}, {"train", p.train_count}, {"test", p.test_count}});
    return {{"task", to_string(task)},
            {"dataset", dataset},
            {"method", method},
            {"labels", labels.names()},
            {"out_of_domain", out_of_domain},
            {"runs", runs_j},
            {"mean", mean.to_json()},
            {"std", stddev.to_json()},
            {"per_class", pc},
            {"explanation_count", explanations.size()},
            {"extra", extra}};
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    r.task = parse_granularity(j.at("task").get<std::string>());
    r.dataset = j.at("dataset").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.labels = LabelSpace(j.at("labels").get<std::vector<std::string>>());
    r.out_of_domain = j.value("out_of_domain", false);
    for (const auto& rj : j.at("runs")) {
        RunRecord run;
        run.seed = rj.at("seed").get<std::uint64_t>();
        run.metrics = Metrics::from_json(rj.at("metrics"));
        run.per_class_f1 = rj.at("per_class_f1").get<std::map<std::string, double>>();
        run.epoch_seconds = rj.value("epoch_seconds", std::vector<double>{});
        r.runs.push_back(std::move(run));
    }
    r.mean = Metrics::from_json(j.at("mean"));
    r.stddev = Metrics::from_json(j.at("std"));
    for (const auto& p : j.at("per_class"))
        r.per_class.push_back({p.at("label").get<std::string>(), p.at("f1").get<double>(),
                               p.at("train").get<std::size_t>(), p.at("test").get<std::size_t>()});
    r.extra = j.value("extra", json::object());
    return r;
}

void EvalReport::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write report " + path.string());
    out << to_json().dump(2) << '\n';
}

EvalReport EvalReport::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open report " + path.string());
    try {
        return from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void EvalReport::write_explanations(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (const auto& e : explanations) out << e.dump() << '\n';
}

// ---------------------------------------------------------------- baselines

std::vector<std::string> frequency_baseline(const std::vector<std::string>& train_labels,
                                            std::size_t n, std::uint64_t seed, FrequencyMode mode) {
    if (train_labels.empty()) throw LengthMismatch("frequency baseline needs training labels");
    std::map<std::string, std::size_t> counts;
    for (const auto& l : train_labels) ++counts[l];
    std::vector<std::string> out;
    out.reserve(n);
    if (mode == FrequencyMode::argmax) {
        auto best = std::max_element(counts.begin(), counts.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
        out.assign(n, best->first);
        return out;
    }
    std::vector<std::string> names;
    std::vector<double> weights;
    for (const auto& [l, c] : counts) {
        names.push_back(l);
        weights.push_back(static_cast<double>(c));
    }
    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
    for (std::size_t i = 0; i < n; ++i) out.push_back(names[dist(rng)]);
    return out;
}

std::vector<std::string> random_baseline(const LabelSpace& labels, std::size_t n, std::uint64_t seed) {
    if (labels.empty()) throw LengthMismatch("random baseline needs a label space");
    std::mt19937_64 rng(seed);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(labels.name(rng() % labels.size()));
    return out;
}

// ---------------------------------------------------------------- renderers

namespace {
std::string fmt3(double x) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << x;
    return os.str();
}
}  // namespace

std::string render_main_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "Method" << std::setw(16) << "Dataset" << std::setw(8) << "Task"
       << std::right << std::setw(8) << "Acc" << std::setw(8) << "P" << std::setw(8) << "R"
       << std::setw(16) << "F1" << '\n';
    for (const auto& r : reports) {
        os << std::left << std::setw(14) << r.method << std::setw(16)
           << (r.dataset + (r.out_of_domain ? "*" : "")) << std::setw(8) << to_string(r.task)
           << std::right << std::setw(8) << fmt3(r.mean.accuracy) << std::setw(8)
           << fmt3(r.mean.precision) << std::setw(8) << fmt3(r.mean.recall) << std::setw(16)
           << (fmt3(r.mean.f1) + " +-" + fmt3(r.stddev.f1)) << '\n';
    }
    return os.str();
}

std::string render_per_class_table(const EvalReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(32) << "class" << std::right << std::setw(8) << "F1" << std::setw(8)
       << "#test" << std::setw(8) << "#train" << '\n';
    auto rows = report.per_class;
    std::stable_sort(rows.begin(), rows.end(),
                     [](const PerClassRow& a, const PerClassRow& b) { return a.test_count > b.test_count; });
    for (const auto& p : rows)
        os << std::left << std::setw(32) << p.label << std::right << std::setw(8) << fmt3(p.f1)
           << std::setw(8) << p.test_count << std::setw(8) << p.train_count << '\n';
    return os.str();
}

std::string render_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "method,dataset,task,out_of_domain,runs,accuracy,precision,recall,f1,f1_std\n";
    for (const auto& r : reports)
        os << r.method << ',' << r.dataset << ',' << to_string(r.task) << ','
           << (r.out_of_domain ? 1 : 0) << ',' << r.runs.size() << ',' << fmt3(r.mean.accuracy) << ','
           << fmt3(r.mean.precision) << ',' << fmt3(r.mean.recall) << ',' << fmt3(r.mean.f1) << ','
           << fmt3(r.stddev.f1) << '\n';
    return os.str();
}

}  // namespace fallacy

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/taxonomy.hpp"

namespace fallacy {

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;  // support-weighted
    double recall = 0.0;
    double f1 = 0.0;

    nlohmann::json to_json() const;
    static Metrics from_json(const nlohmann::json& j);
};

struct ClassScore {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // gold count
};

// Per-class precision/recall/F1 over `labels` (or the union of gold and
// predicted labels, sorted, when `labels` is empty). A class with no
// predicted positives has precision 0; with no gold items, recall 0.
std::vector<ClassScore> per_class_scores(const std::vector<std::string>& gold,
                                         const std::vector<std::string>& pred,
                                         const LabelSpace& labels = {});

// Accuracy and support-weighted P/R/F1.
Metrics weighted_metrics(const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                         const LabelSpace& labels = {});

struct RunRecord {
    std::uint64_t seed = 0;
    Metrics metrics;
    std::map<std::string, double> per_class_f1;
    std::vector<double> epoch_seconds;
};

struct PerClassRow {
    std::string label;
    double f1 = 0.0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
};

struct EvalReport {
    Granularity task = Granularity::binary;
    std::string dataset;
    std::string method;
    LabelSpace labels;
    bool out_of_domain = false;

    std::vector<RunRecord> runs;
    Metrics mean;
    Metrics stddev;  // sample (n-1) standard deviation; 0 for one run
    std::vector<PerClassRow> per_class;
    std::vector<nlohmann::json> explanations;  // one record per prediction
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static EvalReport load(const std::filesystem::path& path);
    void write_explanations(const std::filesystem::path& path) const;
};

// Builds a single-run report from gold/predicted labels.
EvalReport make_report(Granularity task, std::string dataset, std::string method, LabelSpace labels,
                       const std::vector<std::string>& gold, const std::vector<std::string>& pred,
                       std::uint64_t seed, const std::map<std::string, std::size_t>& train_counts = {});

// Mean and sample std per metric; per-class F1 averaged. Throws
// HeterogeneousReports when task, dataset, method or label space differ.
EvalReport aggregate_runs(const std::vector<EvalReport>& reports);

double sample_stddev(const std::vector<double>& xs);

// Reference baselines over the training label distribution.
enum class FrequencyMode { sampling, argmax };
std::vector<std::string> frequency_baseline(const std::vector<std::string>& train_labels,
                                            std::size_t n, std::uint64_t seed,
                                            FrequencyMode mode = FrequencyMode::sampling);
std::vector<std::string> random_baseline(const LabelSpace& labels, std::size_t n, std::uint64_t seed);

// Text renderers.
std::string render_main_table(const std::vector<EvalReport>& reports);
std::string render_per_class_table(const EvalReport& report);
std::string render_csv(const std::vector<EvalReport>& reports);

}  // namespace fallacy

#include "fallacy/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fallacy/augment.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/evalreport.hpp"
#include "fallacy/ibr.hpp"
#include "fallacy/ki.hpp"
#include "fallacy/pbr.hpp"
#include "fallacy/training.hpp"

namespace fallacy::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ config

namespace {

fs::path base_dir(const json& cfg) { return fs::path(cfg.value("_base", std::string("."))); }

fs::path resolve(const json& cfg, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base_dir(cfg) / path;
}

json* walk(json& root, const std::string& dotted, bool create) {
    json* node = &root;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const auto key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("empty key in '" + dotted + "'");
        if (!node->is_object()) {
            if (!create) return nullptr;
            *node = json::object();
        }
        if (!node->contains(key) && !create) return nullptr;
        node = &(*node)[key];
        if (dot == std::string::npos) return node;
        start = dot + 1;
    }
}

const std::vector<std::string> kMethods{"baseline", "ibr", "pbr", "ki"};

}  // namespace

json load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json cfg;
    try {
        cfg = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError(path.string() + ": config must be a JSON object");
    cfg["_base"] = fs::absolute(path).parent_path().string();
    return cfg;
}

void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw;
    }
    *walk(cfg, key, true) = value;
}

void validate_config(const json& cfg) {
    const auto method = cfg.value("method", std::string());
    if (std::find(kMethods.begin(), kMethods.end(), method) == kMethods.end())
        throw ConfigError("method must be one of baseline, ibr, pbr, ki (got '" + method + "')");
    parse_granularity(cfg.value("task", std::string("binary")));
    if (!cfg.contains("data") || !cfg.at("data").contains("path"))
        throw ConfigError("config needs data.path");
    const auto data = resolve(cfg, cfg.at("data").at("path").get<std::string>());
    if (!fs::exists(data)) throw ConfigError("dataset not found: " + data.string());
    if (cfg.at("data").contains("climate")) {
        const auto c = resolve(cfg, cfg.at("data").at("climate").get<std::string>());
        if (!fs::exists(c)) throw ConfigError("climate dataset not found: " + c.string());
    }
    if (method == "ki") {
        if (!cfg.contains("kg")) throw ConfigError("method ki needs a kg path");
        const auto kg = resolve(cfg, cfg.at("kg").get<std::string>());
        if (!fs::exists(kg)) throw ConfigError("knowledge store not found: " + kg.string());
    }
    if (cfg.contains("curriculum")) {
        if (method != "baseline" && method != "pbr")
            throw ConfigError("curriculum plans wrap the baseline and pbr methods only");
        const auto plan = CurriculumPlan::from_json(cfg.at("curriculum"));
        if (plan.stage_order.back() != parse_granularity(cfg.value("task", std::string("binary"))))
            throw ConfigError("the last curriculum stage must be the configured task");
    }
    if (cfg.contains("seeds") && (!cfg.at("seeds").is_array() || cfg.at("seeds").empty()))
        throw ConfigError("seeds must be a non-empty list");
    if (!cfg.contains("output_dir")) throw ConfigError("config needs output_dir");
}

const std::map<std::string, std::string>& knobs() {
    static const std::map<std::string, std::string> table{
        {"k_cases", "model.k_cases"},
        {"retriever", "model.retriever"},
        {"attention", "model.attention_enabled"},
        {"similarity_threshold", "model.similarity_threshold"},
        {"num_positive_prototypes", "model.num_positive_prototypes"},
        {"num_negative_prototypes", "model.num_negative_prototypes"},
        {"similarity_ranking", "model.similarity_ranking"},
        {"branching_factor", "model.branching_factor"},
        {"hops", "model.hops"},
        {"dropout", "model.dropout"},
        {"learning_rate", "train.learning_rate"},
        {"weight_decay", "train.weight_decay"},
        {"epochs", "train.epochs"},
    };
    return table;
}

std::string knob_path(const std::string& knob) {
    auto it = knobs().find(knob);
    if (it != knobs().end()) return it->second;
    std::string valid;
    for (const auto& [k, _] : knobs()) valid += (valid.empty() ? "" : ", ") + k;
    throw UnknownKnob("unknown sweep knob '" + knob + "'; valid knobs: " + valid);
}

json parse_grid_arg(const std::string& arg) {
    json grid = json::object();
    std::istringstream in(arg);
    std::string part;
    while (std::getline(in, part, ';')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("grid entry '" + part + "' is not knob=v1,v2");
        json values = json::array();
        std::istringstream vs(part.substr(eq + 1));
        std::string v;
        while (std::getline(vs, v, ',')) {
            try {
                values.push_back(json::parse(v));
            } catch (const json::exception&) {
                values.push_back(v);
            }
        }
        grid[part.substr(0, eq)] = values;
    }
    return grid;
}

std::vector<json> expand_grid(const json& grid) {
    if (!grid.is_object() || grid.empty()) throw ConfigError("grid must be a non-empty object");
    std::vector<json> points{json::object()};
    for (const auto& [knob, values] : grid.items()) {
        knob_path(knob);
        const json list = values.is_array() ? values : json::array({values});
        if (list.empty()) throw ConfigError("grid knob '" + knob + "' has no values");
        std::vector<json> next;
        for (const auto& p : points)
            for (const auto& v : list) {
                json q = p;
                q[knob] = v;
                next.push_back(q);
            }
        points = std::move(next);
    }
    return points;
}

fs::path cache_dir() {
    const char* v = std::getenv("FALLACY_CACHE_DIR");
    return v && *v ? fs::path(v) : fs::path();
}

int exit_code_for(const std::exception& e) {
    if (const auto* fe = dynamic_cast<const Error*>(&e)) {
        static const std::set<std::string> config_kinds{
            "ConfigError",    "UnknownKnob",       "UnsupportedMethod", "SchemaError",
            "LabelError",     "UnknownClass",      "ExcludedClass",     "UnmappedTechnique",
            "StrategyUnavailable", "MissingStageData", "LabelSpaceMismatch", "TooFewPrototypes",
            "TooFewSamples",  "EmptyClass"};
        return config_kinds.count(fe->kind()) ? kConfigError : kRuntimeFailure;
    }
    if (dynamic_cast<const CLI::Error*>(&e)) return kConfigError;
    return kRuntimeFailure;
}

// ------------------------------------------------------------------ models

namespace {

std::shared_ptr<const KnowledgeStore> shared_store(const fs::path& path) {
    static std::map<std::string, std::shared_ptr<const KnowledgeStore>> stores;
    const auto key = fs::absolute(path).string();
    auto& slot = stores[key];
    if (!slot) slot = std::make_shared<const KnowledgeStore>(KnowledgeStore::load(path));
    return slot;
}

}  // namespace

std::unique_ptr<Classifier> build_model(const std::string& method, const json& model_config,
                                        const LabelSpace& labels, std::uint64_t seed,
                                        const Resources& resources) {
    const json mc = model_config.is_null() ? json::object() : model_config;
    if (method == "baseline") return std::make_unique<BaselineClassifier>(BaselineConfig::from_json(mc), labels, seed);
    if (method == "ibr") {
        auto m = std::make_unique<IbrClassifier>(IbrConfig::from_json(mc), labels, seed);
        if (auto c = cache_dir(); !c.empty()) m->set_cache_dir(c);
        return m;
    }
    if (method == "pbr") return std::make_unique<PbrClassifier>(PbrConfig::from_json(mc), labels, seed);
    if (method == "ki") {
        if (resources.kg_path.empty()) throw ConfigError("method ki needs a kg path");
        return std::make_unique<KiClassifier>(KiConfig::from_json(mc), labels, seed, shared_store(resources.kg_path));
    }
    throw ConfigError("unknown method '" + method + "'");
}

void save_model(const Classifier& model, Granularity task, const fs::path& path, const Resources& resources) {
    json extra = json::object();
    if (const auto* ibr = dynamic_cast<const IbrClassifier*>(&model)) {
        const auto stem = path.stem().string();
        const auto blob = stem + ".casebase.bin";
        const auto sidecar = stem + ".casebase.json";
        ibr->case_base().save(path.parent_path() / blob, path.parent_path() / sidecar);
        extra["case_base_blob"] = blob;
        extra["case_base_sidecar"] = sidecar;
    } else if (const auto* pbr = dynamic_cast<const PbrClassifier*>(&model)) {
        extra["exemplars"] = pbr->exemplars_json();
    } else if (dynamic_cast<const KiClassifier*>(&model)) {
        extra["kg"] = fs::absolute(resources.kg_path).string();
    }
    make_checkpoint(model, task, extra).save(path);
}

std::unique_ptr<Classifier> load_model(const fs::path& path, Checkpoint* out) {
    auto ck = Checkpoint::load(path);
    std::unique_ptr<Classifier> model;
    if (ck.method == "baseline") {
        model = std::make_unique<BaselineClassifier>(BaselineConfig::from_json(ck.config), ck.labels, 0);
    } else if (ck.method == "ibr") {
        auto m = std::make_unique<IbrClassifier>(IbrConfig::from_json(ck.config), ck.labels, 0);
        if (ck.extra.contains("case_base_blob"))
            m->set_case_base(CaseBase::load(path.parent_path() / ck.extra.at("case_base_blob").get<std::string>(),
                                            path.parent_path() / ck.extra.at("case_base_sidecar").get<std::string>()));
        model = std::move(m);
    } else if (ck.method == "pbr") {
        auto m = std::make_unique<PbrClassifier>(PbrConfig::from_json(ck.config), ck.labels, 0);
        if (ck.extra.contains("exemplars")) m->load_exemplars(ck.extra.at("exemplars"));
        model = std::move(m);
    } else if (ck.method == "ki") {
        if (!ck.extra.contains("kg")) throw ArchitectureMismatch("ki checkpoint does not name its knowledge store");
        model = std::make_unique<KiClassifier>(KiConfig::from_json(ck.config), ck.labels, 0,
                                               shared_store(ck.extra.at("kg").get<std::string>()));
    } else {
        throw ArchitectureMismatch("unknown method '" + ck.method + "' in " + path.string());
    }
    params_from_json(model->params(), ck.params);
    model->weights_loaded();
    if (out) *out = std::move(ck);
    return model;
}

// ---------------------------------------------------------------- prepare

namespace {

const FallacyTaxonomy& taxonomy_for(const json& cfg) {
    static std::map<std::string, FallacyTaxonomy> cache;
    const auto key = cfg.contains("taxonomy") ? resolve(cfg, cfg.at("taxonomy").get<std::string>()).string() : "";
    auto it = cache.find(key);
    if (it == cache.end())
        it = cache.emplace(key, key.empty() ? FallacyTaxonomy::builtin() : FallacyTaxonomy::load(key)).first;
    return it->second;
}

LoadOptions load_options(const json& data) {
    LoadOptions o;
    if (data.contains("split_ratios")) {
        const auto r = data.at("split_ratios").get<std::vector<double>>();
        if (r.size() != 3) throw ConfigError("split_ratios needs three numbers");
        o.ratios = {r[0], r[1], r[2]};
    }
    o.seed = data.value("split_seed", o.seed);
    return o;
}

SplitSet load_for_task(const json& cfg, const json& data, Granularity task, const FallacyTaxonomy& tax,
                       ProvenanceLog& log) {
    const auto path = resolve(cfg, data.at("path").get<std::string>());
    if (!fs::exists(path)) throw ConfigError("dataset not found: " + path.string());
    const auto source = parse_source(data.value("source", std::string("logic")));
    const auto labels = parse_granularity(data.value("labels", std::string(to_string(task))));
    auto splits = load_dataset(path, source, labels, tax, load_options(data), &log);
    if (labels == task) return splits;
    if (labels == Granularity::fine && task == Granularity::coarse) {
        DeriveCoarseOptions o;
        o.small_class_max = data.value("small_class_max", o.small_class_max);
        return derive_coarse(splits, tax, o, &log);
    }
    if (labels == Granularity::fine && task == Granularity::binary) return splits;  // binary labels already set
    throw ConfigError("cannot train a " + std::string(to_string(task)) + " task on " +
                      std::string(to_string(labels)) + " labels");
}

}  // namespace

SplitSet prepare_for(const json& cfg, const json& data, Granularity task, ProvenanceLog& log);

SplitSet prepare_for(const json& cfg, const json& data, Granularity task, ProvenanceLog& log) {
    const auto& tax = taxonomy_for(cfg);
    SplitSet splits = load_for_task(cfg, data, task, tax, log);

    if (data.contains("ptc")) {
        if (task != Granularity::coarse) throw ConfigError("the propaganda merge applies to the coarse task only");
        const auto& p = data.at("ptc");
        const auto mapping = p.contains("mapping")
                                 ? TechniqueMapping::load(resolve(cfg, p.at("mapping").get<std::string>()), tax)
                                 : TechniqueMapping::builtin(tax);
        PtcOptions o;
        const auto rule = p.value("context_rule", std::string("unless_other_class"));
        if (rule == "unless_other_class") o.context_rule = ContextRule::unless_other_class;
        else if (rule == "only_if_unlabeled") o.context_rule = ContextRule::only_if_unlabeled;
        else throw ConfigError("context_rule must be unless_other_class or only_if_unlabeled");
        auto extra = adapt_ptc(load_ptc_jsonl(resolve(cfg, p.at("path").get<std::string>())), mapping, tax, o, &log);
        for (auto& a : extra) splits.train.arguments.push_back(std::move(a));
    }

    if (cfg.contains("augment") && cfg.at("augment").value("enabled", true)) {
        const auto& a = cfg.at("augment");
        const auto acfg = AugmentationConfig::from_json(a);
        AugmentResources res;
        if (a.contains("vectors"))
            res.vectors = std::make_shared<const WordVectors>(WordVectors::load(resolve(cfg, a.at("vectors").get<std::string>())));
        if (a.contains("synonyms"))
            res.synonyms = std::make_shared<const SynonymTable>(SynonymTable::load(resolve(cfg, a.at("synonyms").get<std::string>())));
        const auto strategy = make_strategy(acfg, res);
        splits.train = augment_to_quota(splits.train, acfg, *strategy, a.value("seed", std::uint64_t{7}), &log);
    }
    return splits;
}

SplitSet prepare_splits(const json& cfg, ProvenanceLog& log) {
    return prepare_for(cfg, cfg.at("data"), parse_granularity(cfg.value("task", std::string("binary"))), log);
}

// ---------------------------------------------------------------- commands

namespace {

fs::path output_dir(const json& cfg) { return resolve(cfg, cfg.at("output_dir").get<std::string>()); }

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << text;
}

json split_stats(const SplitSet& s) {
    json j = json::object();
    for (const auto* d : {&s.train, &s.dev, &s.test}) j[d->name] = d->class_counts();
    return j;
}

SplitSet prepared_or_fresh(const json& cfg, const json& data, Granularity task, const fs::path& dir,
                           bool write) {
    const auto train = dir / "train.jsonl";
    if (fs::exists(train) && fs::exists(dir / "dev.jsonl") && fs::exists(dir / "test.jsonl")) {
        SplitSet s;
        s.train = read_split_jsonl(train, task, "train");
        s.dev = read_split_jsonl(dir / "dev.jsonl", task, "dev");
        s.test = read_split_jsonl(dir / "test.jsonl", task, "test");
        return s;
    }
    ProvenanceLog log;
    auto s = prepare_for(cfg, data, task, log);
    if (write) {
        fs::create_directories(dir);
        write_split_jsonl(dir / "train.jsonl", s.train);
        write_split_jsonl(dir / "dev.jsonl", s.dev);
        write_split_jsonl(dir / "test.jsonl", s.test);
        log.write_jsonl(dir / "provenance.jsonl");
        write_text(dir / "stats.json", split_stats(s).dump(2) + "\n");
    }
    return s;
}

int cmd_prepare(const json& cfg) {
    validate_config(cfg);
    const auto task = parse_granularity(cfg.value("task", std::string("binary")));
    const auto dir = output_dir(cfg) / "prepared" / std::string(to_string(task));
    ProvenanceLog log;
    const auto s = prepare_splits(cfg, log);
    fs::create_directories(dir);
    write_split_jsonl(dir / "train.jsonl", s.train);
    write_split_jsonl(dir / "dev.jsonl", s.dev);
    write_split_jsonl(dir / "test.jsonl", s.test);
    log.write_jsonl(dir / "provenance.jsonl");
    const auto stats = split_stats(s);
    write_text(dir / "stats.json", stats.dump(2) + "\n");
    std::cout << stats.dump(2) << '\n';
    return kOk;
}

TrainOptions train_options(const json& cfg, const std::string& method, std::uint64_t seed) {
    TrainOptions o;
    const json mc = cfg.value("model", json::object());
    if (method == "ki") {
        const auto k = KiConfig::from_json(mc);
        o.epochs = k.epochs;
        o.learning_rate = k.learning_rate;
    } else if (method == "pbr") {
        o.patience = PbrConfig::from_json(mc).early_stopping_patience;
    }
    o = TrainOptions::from_json(cfg.value("train", json::object()), o);
    o.seed = seed;
    return o;
}

struct TrainOutcome {
    EvalReport report;
    std::optional<EvalReport> zero_shot;
};

TrainOutcome run_training(const json& cfg, const fs::path& out_dir) {
    validate_config(cfg);
    const auto method = cfg.at("method").get<std::string>();
    const auto task = parse_granularity(cfg.value("task", std::string("binary")));
    const auto& tax = taxonomy_for(cfg);
    const auto dataset = cfg.at("data").value("name", fs::path(cfg.at("data").at("path").get<std::string>()).stem().string());
    std::vector<std::uint64_t> seeds = cfg.value("seeds", std::vector<std::uint64_t>{1, 2, 3});
    Resources res;
    if (cfg.contains("kg")) res.kg_path = resolve(cfg, cfg.at("kg").get<std::string>());
    const json mc = cfg.value("model", json::object());

    const auto splits = prepared_or_fresh(cfg, cfg.at("data"), task,
                                          out_dir / "prepared" / std::string(to_string(task)), true);
    std::optional<DatasetSplit> climate;
    if (cfg.at("data").contains("climate")) {
        json cdata = cfg.at("data");
        cdata["path"] = cdata.at("climate");
        cdata["source"] = "logic_climate";
        cdata.erase("ptc");
        json ccfg = cfg;
        ccfg.erase("augment");
        ProvenanceLog log;
        climate = prepare_for(ccfg, cdata, task, log).test;
    }

    std::vector<EvalReport> runs, zs_runs;
    std::string runtime_csv = "seed,epoch,seconds,train_loss,dev_f1\n";
    for (auto seed : seeds) {
        const auto seed_dir = out_dir / ("seed" + std::to_string(seed));
        fs::create_directories(seed_dir);
        std::unique_ptr<Classifier> model;
        EvalReport report;
        TrainResult training;
        if (cfg.contains("curriculum")) {
            const auto plan = CurriculumPlan::from_json(cfg.at("curriculum"));
            std::map<Granularity, SplitSet> datasets;
            std::map<Granularity, LabelSpace> spaces;
            for (auto g : plan.stage_order) {
                json data = cfg.at("data");
                if (cfg.contains("stage_data") && cfg.at("stage_data").contains(std::string(to_string(g))))
                    data = cfg.at("stage_data").at(std::string(to_string(g)));
                else if (g != task)
                    data.erase("ptc");
                datasets[g] = prepared_or_fresh(cfg, data, g, out_dir / "prepared" / std::string(to_string(g)), true);
                spaces[g] = tax.label_space(g);
            }
            ModelFactory factory = [&](const LabelSpace& labels, std::uint64_t s) {
                return build_model(method, mc, labels, s, res);
            };
            const auto result = run_plan(plan, datasets, factory, seed, seed_dir / "curriculum", dataset, spaces);
            if (!result.lineage_intact()) throw TrainingFailure("curriculum weight lineage is broken");
            report = result.stages.back().report;
            training = result.stages.back().training;
            report.extra["lineage"] = result.lineage();
            model = load_model(result.stages.back().checkpoint);
        } else {
            model = build_model(method, mc, tax.label_space(task), seed, res);
            auto stage = train_stage(*model, splits, task, train_options(cfg, method, seed), dataset, seed);
            report = std::move(stage.report);
            training = std::move(stage.training);
            if (auto* ibr = dynamic_cast<IbrClassifier*>(model.get()))
                report.extra["self_exclusions"] = ibr->self_exclusions();
        }
        save_model(*model, task, seed_dir / "model.json", res);
        if (auto* pbr = dynamic_cast<PbrClassifier*>(model.get())) {
            pbr->export_matrix(seed_dir / "prototypes.tsv");
            write_text(seed_dir / "prototype_responsibility.json", pbr->responsibility_table().dump(2) + "\n");
        }
        report.save(seed_dir / "report.json");
        for (const auto& e : training.history)
            runtime_csv += std::to_string(seed) + "," + std::to_string(e.epoch) + "," + std::to_string(e.seconds) +
                           "," + std::to_string(e.train_loss) + "," + std::to_string(e.dev.f1) + "\n";
        runs.push_back(std::move(report));
        if (climate) {
            auto zs = zero_shot_eval(*model, *climate, task, "logic_climate", seed);
            zs.method = model->method();
            zs.save(seed_dir / "report_zero_shot.json");
            zs_runs.push_back(std::move(zs));
        }
    }

    TrainOutcome out{aggregate_runs(runs), std::nullopt};
    out.report.save(out_dir / "report.json");
    out.report.write_explanations(out_dir / "explanations.jsonl");
    std::string text = render_main_table({out.report}) + "\n" + render_per_class_table(out.report);
    if (!zs_runs.empty()) {
        out.zero_shot = aggregate_runs(zs_runs);
        out.zero_shot->save(out_dir / "report_zero_shot.json");
        text += "\n" + render_main_table({*out.zero_shot});
    }
    write_text(out_dir / "report.txt", text);
    write_text(out_dir / "runtime.csv", runtime_csv);
    return out;
}

int cmd_train(const json& cfg) {
    const auto out = run_training(cfg, output_dir(cfg));
    std::cout << render_main_table({out.report});
    if (out.zero_shot) std::cout << render_main_table({*out.zero_shot});
    return kOk;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data, const std::string& task_name,
             const std::string& dataset, bool zero_shot, const fs::path& out) {
    Checkpoint ck;
    auto model = load_model(checkpoint, &ck);
    const auto task = task_name.empty() ? ck.task : parse_granularity(task_name);
    if (!fs::exists(data)) throw ConfigError("evaluation data not found: " + data.string());
    auto split = read_split_jsonl(data, task, "eval");
    EvalReport report;
    if (zero_shot) {
        report = zero_shot_eval(*model, split, task, dataset);
    } else {
        const auto eval = evaluate_split(*model, split, task, model->supports_explanations());
        report = evaluation_report(eval, *model, task, dataset, DatasetSplit{}, 0);
    }
    if (!out.empty()) {
        fs::create_directories(fs::absolute(out).parent_path());
        report.save(out);
        fs::path ex = out;
        ex.replace_extension(".explanations.jsonl");
        report.write_explanations(ex);
    }
    std::cout << render_main_table({report}) << '\n' << render_per_class_table(report);
    return kOk;
}

int cmd_explain(const fs::path& checkpoint, const std::string& text, int top) {
    Checkpoint ck;
    auto model = load_model(checkpoint, &ck);
    if (!model->supports_explanations())
        throw UnsupportedMethod("method '" + model->method() + "' produces no explanations");
    Argument a;
    a.id = "input";
    a.text = text;
    json out;
    auto p = model->predict(a);
    out["prediction"] = model->labels().name(p.label);
    json probs = json::object();
    for (std::size_t i = 0; i < p.probabilities.size(); ++i) probs[model->labels().name(i)] = p.probabilities[i];
    out["probabilities"] = probs;
    out["method"] = model->method();
    if (auto* pbr = dynamic_cast<PbrClassifier*>(model.get())) {
        json list = json::array();
        for (const auto& m : pbr->nearest_prototypes(a, top, 2)) {
            json ex = json::array();
            for (const auto& e : m.exemplars) ex.push_back({{"id", e.id}, {"text", e.text}, {"distance", e.distance}});
            list.push_back({{"prototype", m.prototype}, {"class", m.assigned_class}, {"distance", m.distance},
                            {"exemplars", ex}});
        }
        out["explanation"] = {{"prototypes", list}};
    } else {
        out["explanation"] = p.explanation;
    }
    std::cout << out.dump(2) << '\n';
    return kOk;
}

std::string point_name(const json& point) {
    std::string name;
    for (const auto& [k, v] : point.items()) {
        std::string val = v.is_string() ? v.get<std::string>() : v.dump();
        for (auto& c : val)
            if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
        name += (name.empty() ? "" : "__") + k + "-" + val;
    }
    return name;
}

int cmd_sweep(const json& cfg, const json& grid) {
    const auto points = expand_grid(grid);
    const auto root = output_dir(cfg) / "sweep";
    std::vector<std::pair<json, EvalReport>> results;
    for (const auto& point : points) {
        json c = cfg;
        for (const auto& [knob, value] : point.items()) {
            json v = value;
            if (knob == "attention" && v.is_string()) v = v.get<std::string>() == "on";
            *walk(c, knob_path(knob), true) = v;
        }
        auto outcome = run_training(c, root / point_name(point));
        outcome.report.extra["grid_point"] = point;
        results.emplace_back(point, std::move(outcome.report));
    }
    std::stable_sort(results.begin(), results.end(),
                     [](const auto& a, const auto& b) { return a.second.mean.f1 > b.second.mean.f1; });
    json summary = json::array();
    std::ostringstream table;
    table << "setting\tf1\tf1_std\taccuracy\n";
    for (const auto& [point, r] : results) {
        summary.push_back({{"setting", point}, {"mean", r.mean.to_json()}, {"std", r.stddev.to_json()}});
        table << point.dump() << '\t' << r.mean.f1 << '\t' << r.stddev.f1 << '\t' << r.mean.accuracy << '\n';
    }
    write_text(root / "summary.json", summary.dump(2) + "\n");
    write_text(root / "summary.tsv", table.str());
    std::cout << table.str();
    return kOk;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& format, bool per_class,
               const fs::path& out) {
    std::vector<EvalReport> reports;
    for (const auto& p : paths) reports.push_back(EvalReport::load(p));
    std::string text;
    if (format == "csv") {
        text = render_csv(reports);
    } else if (format == "text") {
        text = render_main_table(reports);
        if (per_class)
            for (const auto& r : reports)
                text += "\n" + r.method + " / " + r.dataset + " / " + std::string(to_string(r.task)) + "\n" +
                        render_per_class_table(r);
    } else {
        throw ConfigError("report format must be text or csv");
    }
    if (out.empty()) std::cout << text;
    else write_text(out, text);
    return kOk;
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Logical fallacy detection: data preparation, training, evaluation and explanations"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "JSON run config")->required();
        sub->add_option("--set", overrides, "Override a config key (a.b=value)");
    };

    auto* prepare = app.add_subcommand("prepare", "Materialize splits (+ PTC merge, augmentation)");
    add_config(prepare);
    auto* train = app.add_subcommand("train", "Train every configured seed and write reports");
    add_config(train);

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split file");
    std::string ck_path, data_path, task_name, dataset = "eval", out_path;
    bool zero_shot = false;
    eval->add_option("--checkpoint", ck_path)->required();
    eval->add_option("--data", data_path, "Split in JSON lines")->required();
    eval->add_option("--task", task_name);
    eval->add_option("--dataset", dataset);
    eval->add_flag("--zero-shot", zero_shot, "Tag the report out-of-domain and verify no weight change");
    eval->add_option("--out", out_path);

    auto* explain = app.add_subcommand("explain", "Predict one input and print its explanation");
    std::string text;
    int top = 3;
    explain->add_option("--checkpoint", ck_path)->required();
    explain->add_option("--text", text)->required();
    explain->add_option("--top", top, "Prototypes to list (pbr)");

    auto* sweep = app.add_subcommand("sweep", "Run one training per grid point");
    add_config(sweep);
    std::string grid_arg;
    sweep->add_option("--grid", grid_arg, "knob=v1,v2;knob2=... or a JSON file")->required();

    auto* report = app.add_subcommand("report", "Render stored reports");
    auto* render = report->add_subcommand("render", "Main / per-class tables as text or CSV");
    report->require_subcommand(1);
    std::vector<std::string> report_paths;
    std::string format = "text";
    bool per_class = false;
    render->add_option("reports", report_paths, "report.json files")->required();
    render->add_option("--format", format);
    render->add_flag("--per-class", per_class);
    render->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        auto config = [&] {
            auto cfg = load_config(config_path);
            for (const auto& o : overrides) apply_override(cfg, o);
            return cfg;
        };
        if (*prepare) return cmd_prepare(config());
        if (*train) return cmd_train(config());
        if (*eval) return cmd_eval(ck_path, data_path, task_name, dataset, zero_shot, out_path);
        if (*explain) return cmd_explain(ck_path, text, top);
        if (*sweep) {
            json grid;
            if (fs::exists(grid_arg)) {
                std::ifstream in(grid_arg);
                grid = json::parse(in);
            } else {
                grid = parse_grid_arg(grid_arg);
            }
            return cmd_sweep(config(), grid);
        }
        if (*render) return cmd_report(report_paths, format, per_class, out_path);
    } catch (const std::exception& e) {
        const auto* fe = dynamic_cast<const Error*>(&e);
        std::cerr << "error" << (fe ? " [" + fe->kind() + "]" : std::string()) << ": " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kOk;
}

}  // namespace fallacy::cli

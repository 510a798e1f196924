#include "fallacy/curriculum.hpp"

#include <chrono>
#include <fstream>
#include <optional>
#include <set>

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;

std::string_view to_string(CurriculumVariant v) {
    switch (v) {
        case CurriculumVariant::none: return "none";
        case CurriculumVariant::fcl: return "fcl";
        case CurriculumVariant::rcl: return "rcl";
    }
    return "?";
}

CurriculumVariant parse_curriculum_variant(std::string_view s) {
    if (s == "none") return CurriculumVariant::none;
    if (s == "fcl") return CurriculumVariant::fcl;
    if (s == "rcl") return CurriculumVariant::rcl;
    throw ConfigError("unknown curriculum variant '" + std::string(s) + "' (none, fcl, rcl)");
}

CurriculumPlan CurriculumPlan::make(CurriculumVariant variant, Granularity target) {
    CurriculumPlan p;
    p.variant = variant;
    switch (variant) {
        case CurriculumVariant::none:
            p.stage_order = {target};
            p.epochs_per_stage = {10};
            break;
        case CurriculumVariant::fcl:
            break;
        case CurriculumVariant::rcl:
            p.stage_order = {Granularity::fine, Granularity::coarse, Granularity::binary};
            p.epochs_per_stage = {10, 8, 5};
            break;
    }
    return p;
}

void CurriculumPlan::validate() const {
    if (stage_order.empty()) throw ConfigError("curriculum plan has no stages");
    if (epochs_per_stage.size() != stage_order.size())
        throw ConfigError("epochs_per_stage has " + std::to_string(epochs_per_stage.size()) +
                          " entries for " + std::to_string(stage_order.size()) + " stages");
    for (int e : epochs_per_stage)
        if (e < 1) throw ConfigError("every stage needs at least one epoch");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (scheduler != "cosine" && scheduler != "constant")
        throw ConfigError("scheduler must be cosine or constant");
    auto rank = [](Granularity g) { return static_cast<int>(g); };
    switch (variant) {
        case CurriculumVariant::none:
            if (stage_order.size() != 1) throw ConfigError("variant none runs exactly one stage");
            break;
        case CurriculumVariant::fcl:
            for (std::size_t i = 1; i < stage_order.size(); ++i)
                if (rank(stage_order[i]) <= rank(stage_order[i - 1]))
                    throw ConfigError("fcl stages must follow binary -> coarse -> fine");
            break;
        case CurriculumVariant::rcl:
            for (std::size_t i = 1; i < stage_order.size(); ++i)
                if (rank(stage_order[i]) >= rank(stage_order[i - 1]))
                    throw ConfigError("rcl stages must follow fine -> coarse -> binary");
            break;
    }
}

TrainOptions CurriculumPlan::stage_options(std::size_t stage, std::uint64_t seed) const {
    TrainOptions o;
    o.epochs = epochs_per_stage.at(stage);
    o.batch_size = batch_size;
    o.learning_rate = learning_rate;
    o.cosine_schedule = scheduler == "cosine";
    o.seed = stage_seed(seed, stage);
    return o;
}

json CurriculumPlan::to_json() const {
    std::vector<std::string> stages;
    for (auto g : stage_order) stages.emplace_back(to_string(g));
    return {{"variant", to_string(variant)},   {"stages", stages},
            {"epochs", epochs_per_stage},      {"batch_size", batch_size},
            {"learning_rate", learning_rate},  {"scheduler", scheduler}};
}

CurriculumPlan CurriculumPlan::from_json(const json& j) {
    const auto variant = parse_curriculum_variant(j.value("variant", std::string("fcl")));
    Granularity target = Granularity::fine;
    if (j.contains("stages") && j.at("stages").size() == 1)
        target = parse_granularity(j.at("stages").at(0).get<std::string>());
    CurriculumPlan p = make(variant, target);
    if (j.contains("stages")) {
        p.stage_order.clear();
        for (const auto& s : j.at("stages")) p.stage_order.push_back(parse_granularity(s.get<std::string>()));
        if (!j.contains("epochs")) {
            // Keep the default epochs of each named stage.
            std::vector<int> e;
            for (auto g : p.stage_order)
                e.push_back(g == Granularity::binary ? 5 : g == Granularity::coarse ? 8 : 10);
            p.epochs_per_stage = e;
        }
    }
    if (j.contains("epochs")) p.epochs_per_stage = j.at("epochs").get<std::vector<int>>();
    p.batch_size = j.value("batch_size", p.batch_size);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.scheduler = j.value("scheduler", p.scheduler);
    p.validate();
    return p;
}

Checkpoint make_checkpoint(const Classifier& model, Granularity task, json extra) {
    Checkpoint c;
    c.method = model.method();
    c.task = task;
    c.labels = model.labels();
    c.config = model.config_json();
    c.params = params_to_json(model.params());
    c.extra = std::move(extra);
    return c;
}

std::unique_ptr<Classifier> transfer_weights(const Checkpoint& prev, const LabelSpace& labels,
                                             const ModelFactory& factory, std::uint64_t head_seed) {
    auto model = factory(labels, head_seed);
    if (!model) throw ConfigError("model factory returned nothing");
    if (model->method() != prev.method)
        throw ArchitectureMismatch("checkpoint holds a " + prev.method + " model, factory builds " +
                                   model->method());
    if (!(EncoderConfig::from_json(prev.config.at("encoder")) == model->encoder_config()))
        throw ArchitectureMismatch("encoder configuration differs from the checkpoint");
    if (!prev.params.is_object()) throw ArchitectureMismatch("checkpoint has no parameter table");
    if (prev.labels == labels) {
        params_from_json(model->params(), prev.params);
        model->weights_loaded();
        return model;
    }
    // Encoder only: check and load the encoder.* tensors, keep the fresh head.
    nn::ParamSet enc;
    for (const auto& [name, v] : model->params().items())
        if (name.rfind("encoder.", 0) == 0) enc.add(name, v.value());
    json subset = json::object();
    for (const auto& [name, _] : enc.items()) {
        if (!prev.params.contains(name)) throw ArchitectureMismatch("checkpoint is missing layer '" + name + "'");
        subset[name] = prev.params.at(name);
    }
    params_from_json(enc, subset);
    params_assign(model->params(), enc, "encoder.");
    return model;
}

std::uint64_t stage_seed(std::uint64_t seed, std::size_t index) {
    return derive_seed(seed, "stage" + std::to_string(index));
}

StageResult train_stage(Classifier& model, const SplitSet& splits, Granularity task,
                        const TrainOptions& opts, const std::string& dataset, std::uint64_t seed) {
    StageResult r;
    r.task = task;
    r.start_encoder_hash = model.encoder_hash();
    const auto t0 = std::chrono::steady_clock::now();
    DatasetSplit train = splits.train;
    train.label_space = task;
    model.prepare(train, seed);
    const double prep = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.training = train_classifier(model, splits, task, opts);
    r.training.prepare_seconds = prep;
    r.best_encoder_hash = model.encoder_hash();
    const auto eval = evaluate_split(model, splits.test, task, model.supports_explanations());
    r.report = evaluation_report(eval, model, task, dataset, train, seed, &r.training);
    return r;
}

CurriculumResult run_plan(const CurriculumPlan& plan, const std::map<Granularity, SplitSet>& datasets,
                          const ModelFactory& factory, std::uint64_t seed,
                          const std::filesystem::path& output_dir, const std::string& dataset,
                          const std::map<Granularity, LabelSpace>& label_spaces) {
    plan.validate();
    for (auto g : plan.stage_order)
        if (!datasets.count(g))
            throw MissingStageData("no dataset for stage '" + std::string(to_string(g)) + "'");
    std::filesystem::create_directories(output_dir);

    CurriculumResult result;
    std::optional<Checkpoint> prev;
    std::uint64_t inherited = 0;
    for (std::size_t i = 0; i < plan.stage_order.size(); ++i) {
        const auto task = plan.stage_order[i];
        const auto& splits = datasets.at(task);
        LabelSpace labels;
        if (auto it = label_spaces.find(task); it != label_spaces.end()) {
            labels = it->second;
        } else {
            std::set<std::string> names;
            for (const auto* s : {&splits.train, &splits.dev, &splits.test})
                for (const auto& a : s->arguments)
                    if (const auto& l = a.label(task)) names.insert(*l);
            labels = LabelSpace(std::vector<std::string>(names.begin(), names.end()));
        }

        const auto sseed = stage_seed(seed, i);
        std::unique_ptr<Classifier> model =
            prev ? transfer_weights(*prev, labels, factory, sseed) : factory(labels, sseed);

        const auto opts = plan.stage_options(i, seed);
        StageResult stage = train_stage(*model, splits, task, opts, dataset, sseed);
        stage.index = i;
        stage.inherited_encoder_hash = inherited;
        stage.checkpoint = output_dir / ("stage" + std::to_string(i) + "_" + std::string(to_string(task)) + ".json");
        Checkpoint ck = make_checkpoint(*model, task, {{"stage", i}, {"plan", plan.to_json()}});
        ck.save(stage.checkpoint);
        stage.report.extra["stage"] = i;
        stage.report.extra["curriculum"] = plan.to_json();

        // The next stage starts from what was written to disk.
        prev = Checkpoint::load(stage.checkpoint);
        inherited = stage.best_encoder_hash;
        result.stages.push_back(std::move(stage));
    }
    std::ofstream(output_dir / "lineage.json") << result.lineage().dump(2) << '\n';
    return result;
}

json CurriculumResult::lineage() const {
    json out = json::array();
    for (const auto& s : stages)
        out.push_back({{"stage", s.index},
                       {"task", to_string(s.task)},
                       {"checkpoint", s.checkpoint.string()},
                       {"inherited_encoder_hash", s.index == 0 ? json(nullptr) : json(hex64(s.inherited_encoder_hash))},
                       {"start_encoder_hash", hex64(s.start_encoder_hash)},
                       {"best_encoder_hash", hex64(s.best_encoder_hash)},
                       {"best_epoch", s.training.best_epoch},
                       {"test_f1", s.report.mean.f1}});
    return out;
}

bool CurriculumResult::lineage_intact() const {
    for (std::size_t i = 1; i < stages.size(); ++i)
        if (stages[i].start_encoder_hash != stages[i - 1].best_encoder_hash) return false;
    return true;
}

}  // namespace fallacy

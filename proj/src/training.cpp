#include "fallacy/training.hpp"

#include <chrono>
#include <cstdio>
#include <random>

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;

void TrainOptions::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
    if (patience < 0) throw ConfigError("patience must be >= 0");
}

json TrainOptions::to_json() const {
    return {{"epochs", epochs},       {"batch_size", batch_size},
            {"learning_rate", learning_rate}, {"weight_decay", weight_decay},
            {"scheduler", cosine_schedule ? "cosine" : "constant"},
            {"patience", patience},   {"seed", seed}};
}

TrainOptions TrainOptions::from_json(const json& j) { return from_json(j, TrainOptions{}); }

TrainOptions TrainOptions::from_json(const json& j, TrainOptions o) {
    o.epochs = j.value("epochs", o.epochs);
    o.batch_size = j.value("batch_size", o.batch_size);
    o.learning_rate = j.value("learning_rate", o.learning_rate);
    o.weight_decay = j.value("weight_decay", o.weight_decay);
    if (j.contains("scheduler")) {
        const auto s = j.at("scheduler").get<std::string>();
        if (s != "cosine" && s != "constant") throw ConfigError("scheduler must be cosine or constant");
        o.cosine_schedule = s == "cosine";
    }
    o.patience = j.value("patience", o.patience);
    o.seed = j.value("seed", o.seed);
    o.validate();
    return o;
}

std::vector<double> TrainResult::epoch_seconds() const {
    std::vector<double> out;
    for (const auto& e : history) out.push_back(e.seconds);
    return out;
}

json TrainResult::to_json() const {
    json h = json::array();
    for (const auto& e : history)
        h.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev", e.dev.to_json()},
                     {"seconds", e.seconds}});
    return {{"history", h},
            {"best_epoch", best_epoch},
            {"best_dev", best_dev.to_json()},
            {"prepare_seconds", prepare_seconds},
            {"start_encoder_hash", hex64(start_encoder_hash)},
            {"best_encoder_hash", hex64(best_encoder_hash)}};
}

namespace {

std::vector<const Argument*> labeled(const DatasetSplit& split, Granularity task) {
    std::vector<const Argument*> out;
    for (const auto& a : split.arguments)
        if (a.label(task)) out.push_back(&a);
    return out;
}

bool better(const Metrics& a, const Metrics& b) {
    if (a.f1 != b.f1) return a.f1 > b.f1;
    return a.accuracy > b.accuracy;
}

}  // namespace

TrainResult train_classifier(Classifier& model, const SplitSet& splits, Granularity task,
                             const TrainOptions& opts) {
    opts.validate();
    auto train = labeled(splits.train, task);
    if (train.empty()) throw TrainingFailure("no labeled training arguments for task " +
                                             std::string(to_string(task)));
    const bool has_dev = !labeled(splits.dev, task).empty();

    TrainResult result;
    result.start_encoder_hash = model.encoder_hash();
    std::mt19937_64 rng(derive_seed(opts.seed, "train"));
    nn::Adam adam({opts.learning_rate, 0.9, 0.999, 1e-8, opts.weight_decay});
    const long steps_per_epoch =
        static_cast<long>((train.size() + static_cast<std::size_t>(opts.batch_size) - 1) /
                          static_cast<std::size_t>(opts.batch_size));
    const long total_steps = steps_per_epoch * opts.epochs;
    long step = 0;

    nn::ParamSet best = params_snapshot(model.params());
    bool have_best = false;
    int since_best = 0;

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng() % i]);
        double loss_sum = 0;
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(opts.batch_size)) {
            const auto end = std::min(train.size(), start + static_cast<std::size_t>(opts.batch_size));
            std::vector<const Argument*> batch(train.begin() + static_cast<std::ptrdiff_t>(start),
                                               train.begin() + static_cast<std::ptrdiff_t>(end));
            ForwardContext ctx{true, &rng, nullptr};
            nn::Var loss = model.batch_loss(batch, task, ctx);
            if (!std::isfinite(loss.scalar()))
                throw TrainingFailure("non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += loss.scalar() * static_cast<double>(batch.size());
            nn::backward(loss);
            adam.set_lr(opts.cosine_schedule ? nn::cosine_lr(opts.learning_rate, step, total_steps)
                                             : opts.learning_rate);
            adam.step(model.params());
            ++step;
        }
        EpochStats st;
        st.epoch = epoch;
        st.train_loss = loss_sum / static_cast<double>(train.size());
        st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        st.dev = has_dev ? evaluate_split(model, splits.dev, task).metrics
                         : evaluate_split(model, splits.train, task).metrics;
        if (opts.verbose)
            std::fprintf(stderr, "epoch %d loss %.4f dev f1 %.4f acc %.4f (%.2fs)\n", epoch,
                         st.train_loss, st.dev.f1, st.dev.accuracy, st.seconds);
        result.history.push_back(st);
        if (!have_best || better(st.dev, result.best_dev)) {
            have_best = true;
            result.best_dev = st.dev;
            result.best_epoch = epoch;
            best = params_snapshot(model.params());
            since_best = 0;
        } else if (opts.patience > 0 && ++since_best >= opts.patience) {
            break;
        }
    }
    params_assign(model.params(), best);
    result.best_encoder_hash = model.encoder_hash();
    return result;
}

Evaluation evaluate_split(Classifier& model, const DatasetSplit& split, Granularity task,
                          bool with_explanations) {
    Evaluation ev;
    for (const auto& a : split.arguments) {
        const auto& label = a.label(task);
        if (!label) continue;
        ForwardContext ctx;
        auto probs = model.probabilities(model.logits(a, ctx));
        const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        ev.ids.push_back(a.id);
        ev.gold.push_back(*label);
        ev.predicted.push_back(model.labels().name(best));
        if (with_explanations) {
            json rec = {{"id", a.id}, {"gold", *label}, {"predicted", ev.predicted.back()},
                        {"method", model.method()}};
            rec["explanation"] = model.supports_explanations() ? model.explain(a) : json(nullptr);
            ev.explanations.push_back(std::move(rec));
        }
    }
    if (ev.gold.empty()) throw LabelError("split '" + split.name + "' has no labels for task " +
                                          std::string(to_string(task)));
    ev.metrics = weighted_metrics(ev.gold, ev.predicted, model.labels());
    return ev;
}

EvalReport evaluation_report(const Evaluation& eval, const Classifier& model, Granularity task,
                             const std::string& dataset, const DatasetSplit& train,
                             std::uint64_t seed, const TrainResult* training) {
    std::map<std::string, std::size_t> train_counts;
    for (const auto& a : train.arguments)
        if (const auto& l = a.label(task)) ++train_counts[*l];
    auto report = make_report(task, dataset, model.method(), model.labels(), eval.gold,
                              eval.predicted, seed, train_counts);
    report.explanations = eval.explanations;
    if (training) {
        report.runs.front().epoch_seconds = training->epoch_seconds();
        report.extra["training"] = training->to_json();
    }
    return report;
}

EvalReport zero_shot_eval(Classifier& model, const DatasetSplit& target, Granularity task,
                          const std::string& dataset, std::uint64_t seed) {
    for (const auto& a : target.arguments)
        if (const auto& l = a.label(task); l && !model.labels().contains(*l))
            throw LabelSpaceMismatch("target label '" + *l + "' (" + a.id +
                                     ") is not in the model's label space");
    const auto before = model.weight_hash();
    auto eval = evaluate_split(model, target, task, model.supports_explanations());
    const auto after = model.weight_hash();
    if (before != after) throw TrainingFailure("weights changed during zero-shot evaluation");
    DatasetSplit none;
    auto report = evaluation_report(eval, model, task, dataset, none, seed);
    report.out_of_domain = true;
    report.extra["weight_hash_before"] = hex64(before);
    report.extra["weight_hash_after"] = hex64(after);
    return report;
}

}  // namespace fallacy

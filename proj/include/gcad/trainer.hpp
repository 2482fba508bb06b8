#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gcad/adam.hpp"
#include "gcad/autodiff.hpp"
#include "gcad/core.hpp"
#include "gcad/encoder.hpp"
#include "gcad/graph.hpp"
#include "gcad/objectives.hpp"
#include "gcad/rng.hpp"
#include "gcad/scoring.hpp"

namespace gcad {

/// Loss went non-finite; carries the offending graph and step.
struct Divergence : Error {
    using Error::Error;
};

struct TrainConfig {
    enum class Regime { supervised, pretrain, finetune };
    enum class Schedule { warm_linear, exponential };

    Regime regime = Regime::supervised;
    int epochs = -1;        // -1: regime default (supervised 100, pretrain 300, finetune 100)
    double base_lr = -1.0;  // -1: regime default (1e-3; finetune 1e-4)
    Schedule schedule = Schedule::warm_linear;
    double label_fraction = 1.0;  // finetune few-shot control
    std::uint64_t seed = 0;
    bool early_stop = true;
    int patience = 20;
    int batch_size = 1;
    bool in_batch_negatives = false;

    TrainConfig resolved() const {
        TrainConfig c = *this;
        if (c.epochs < 0) c.epochs = c.regime == Regime::pretrain ? 300 : 100;
        if (c.base_lr < 0.0) c.base_lr = c.regime == Regime::finetune ? 1e-4 : 1e-3;
        return c;
    }

    void validate() const {
        if (epochs < 1) throw Error("TrainConfig: epochs must be >= 1");
        if (!(base_lr >= 0.0)) throw Error("TrainConfig: base_lr must be >= 0");
        if (!(label_fraction > 0.0 && label_fraction <= 1.0))
            throw Error("TrainConfig: label_fraction must be in (0, 1]");
        if (batch_size < 1) throw Error("TrainConfig: batch_size must be >= 1");
        if (patience < 1) throw Error("TrainConfig: patience must be >= 1");
    }
};

/// Flat for the first 10% of steps, then linear decay to base/10 at the last
/// step.
inline double warm_linear_lr(double base, std::size_t step, std::size_t total_steps) {
    if (total_steps <= 1) return base;
    std::size_t warm = std::size_t(std::floor(0.1 * double(total_steps)));
    if (step < warm) return base;
    std::size_t last = total_steps - 1;
    if (last <= warm) return base;
    double frac = double(step - warm) / double(last - warm);
    return base * (1.0 - 0.9 * frac);
}

inline double exponential_lr(double base, int epoch) { return base * std::pow(0.96, epoch); }

struct EpochRow {
    int epoch;
    double lr;
    double combined, objective, link;
    std::optional<double> val_auc, val_map;
};

struct TrainReport {
    std::vector<EpochRow> epochs;
    int chosen_epoch = -1;  // argmax validation AUC, ties earliest
    double wall_clock_sec = 0.0;
    std::size_t skipped_units = 0;
    std::size_t total_units = 0;
    bool skipped_majority = false;  // > 50% of training units unusable
    ModelParams best_params;
    MetricReport valid_metrics;  // at the chosen epoch
};

namespace detail {

// A training unit: one graph plus the label view the losses see (labels
// outside the training split are masked to unknown in single-graph mode).
struct TrainUnit {
    const Graph* graph;
    std::vector<int> loss_labels;
};

inline std::vector<TrainUnit> collect_units(const Dataset& ds, const TrainConfig& cfg, Rng& rng) {
    std::vector<TrainUnit> units;
    if (ds.mode == Dataset::Mode::multi) {
        if (ds.split.train_graphs.empty()) throw Error("train: dataset has no training split");
        std::vector<std::string> ids = ds.split.train_graphs;
        if (cfg.label_fraction < 1.0) {
            std::size_t keep = std::max<std::size_t>(
                1, std::size_t(std::lround(cfg.label_fraction * double(ids.size()))));
            rng.shuffle(ids);
            ids.resize(keep);
        }
        for (const std::string& id : ids) {
            const Graph* g = ds.find(id);
            if (!g) throw Error(detail::concat("train: split references unknown graph '", id, "'"));
            units.push_back({g, g->labels});
        }
    } else {
        if (ds.split.train_nodes.empty()) throw Error("train: dataset has no training split");
        const Graph& g = ds.graphs[0];
        std::vector<std::size_t> nodes = ds.split.train_nodes;
        if (cfg.label_fraction < 1.0) {
            std::size_t keep = std::max<std::size_t>(
                1, std::size_t(std::lround(cfg.label_fraction * double(nodes.size()))));
            rng.shuffle(nodes);
            nodes.resize(keep);
        }
        std::vector<int> masked(g.num_nodes(), kLabelUnknown);
        for (std::size_t v : nodes) masked[v] = g.labels[v];
        units.push_back({&g, std::move(masked)});
    }
    return units;
}

inline MetricReport evaluate_split(const Dataset& ds, const ModelParams& params,
                                   const LossConfig& lcfg, bool use_test) {
    ScoreTable rows;
    if (ds.mode == Dataset::Mode::multi) {
        const auto& ids = use_test ? ds.split.test_graphs : ds.split.valid_graphs;
        for (const std::string& id : ids) {
            const Graph* g = ds.find(id);
            if (!g) continue;
            ScoredGraph s = score_graph(*g, params, lcfg.objective);
            rows.insert(rows.end(), s.rows.begin(), s.rows.end());
        }
    } else {
        const auto& nodes = use_test ? ds.split.test_nodes : ds.split.valid_nodes;
        if (!nodes.empty()) {
            ScoredGraph s = score_graph(ds.graphs[0], params, lcfg.objective, &nodes);
            rows = std::move(s.rows);
        }
    }
    return metrics_for_table(rows);
}

}  // namespace detail

/// Algorithm-1 training: shuffled pass over the training units per epoch, one
/// Adam step per batch (batch size 1 reproduces the per-graph update),
/// validation AUC tracking with optional early stopping.
inline TrainReport train(const Dataset& ds, const ModelConfig& mcfg_in, const LossConfig& lcfg,
                         const TrainConfig& tcfg_in,
                         const std::optional<ModelParams>& start_params = std::nullopt) {
    auto t0 = std::chrono::steady_clock::now();
    TrainConfig tcfg = tcfg_in.resolved();
    tcfg.validate();
    lcfg.validate();

    Rng rng(tcfg.seed ? tcfg.seed : 1);
    ModelParams params;
    if (start_params) {
        params = *start_params;
        if (params.config.input_dim != int(ds.feature_dim()))
            throw Error(detail::concat("train: checkpoint input_dim ", params.config.input_dim,
                                       " != dataset feature dim ", ds.feature_dim()));
    } else {
        ModelConfig mcfg = mcfg_in.with_defaults();
        if (mcfg.input_dim == 0) mcfg.input_dim = int(ds.feature_dim());
        Rng init_rng = rng.split(0x1417);
        params = ModelParams::init(mcfg, init_rng);
        if (params.config.input_dim != int(ds.feature_dim()))
            throw Error(detail::concat("train: config input_dim ", params.config.input_dim,
                                       " != dataset feature dim ", ds.feature_dim()));
    }

    Rng unit_rng = rng.split(0x517);
    std::vector<detail::TrainUnit> units = detail::collect_units(ds, tcfg, unit_rng);

    TrainReport report;
    report.total_units = units.size();

    std::size_t batches_per_epoch = (units.size() + std::size_t(tcfg.batch_size) - 1) /
                                    std::size_t(tcfg.batch_size);
    std::size_t total_steps = batches_per_epoch * std::size_t(tcfg.epochs);

    Adam adam(Adam::Config{.lr = tcfg.base_lr, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8});
    auto named = params.named_tensors();
    std::vector<std::string> names;
    for (auto& [n, t] : named) names.push_back(n);

    double best_auc = -1.0;
    report.best_params = params;
    std::size_t step = 0;
    int epochs_since_best = 0;
    Rng shuffle_rng = rng.split(0x5481);
    Rng gumbel_rng = rng.split(0x6081);

    std::vector<bool> skipped_unit(units.size(), false);

    for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::vector<std::size_t> order(units.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_rng.shuffle(order);

        double ep_combined = 0.0, ep_objective = 0.0, ep_link = 0.0;
        std::size_t ep_graphs = 0;
        double lr = tcfg.schedule == TrainConfig::Schedule::exponential
                        ? exponential_lr(tcfg.base_lr, epoch)
                        : 0.0;

        for (std::size_t b = 0; b < order.size(); b += std::size_t(tcfg.batch_size)) {
            std::size_t bend = std::min(order.size(), b + std::size_t(tcfg.batch_size));
            if (tcfg.schedule == TrainConfig::Schedule::warm_linear)
                lr = warm_linear_lr(tcfg.base_lr, step, total_steps);

            Tape tape;
            BoundParams bound = BoundParams::bind(tape, params);

            struct GraphPass {
                std::size_t unit;
                ForwardResult fwd;
            };
            std::vector<GraphPass> passes;
            for (std::size_t k = b; k < bend; ++k) {
                const detail::TrainUnit& unit = units[order[k]];
                // Training needs both label classes in the unit, whatever the
                // objective; one-class graphs are skipped and counted.
                bool has_normal = false, has_abnormal = false;
                for (int y : unit.loss_labels) {
                    has_normal |= (y == kLabelNormal);
                    has_abnormal |= (y == kLabelAbnormal);
                }
                if (!has_normal || !has_abnormal) {
                    skipped_unit[order[k]] = true;
                    continue;
                }
                try {
                    ForwardResult fwd = encoder_forward(tape, *unit.graph, bound, RunMode::train,
                                                        &gumbel_rng);
                    passes.push_back({order[k], std::move(fwd)});
                } catch (const NumericError& e) {
                    throw Divergence(detail::concat("divergence in graph '", unit.graph->id,
                                                    "' at step ", step, ": ", e.what()));
                }
            }

            Var batch_loss;
            std::size_t used = 0;
            for (std::size_t pi = 0; pi < passes.size(); ++pi) {
                const detail::TrainUnit& unit = units[passes[pi].unit];
                std::optional<Var> extra;
                if (tcfg.in_batch_negatives && passes.size() > 1 &&
                    lcfg.objective == LossConfig::Objective::contrastive) {
                    // Nodes of the other graphs in the batch enter the
                    // denominator only; they never join message passing.
                    // Normalized like the in-graph scores.
                    Var q = normalize_rows(passes[pi].fwd.context());
                    for (std::size_t pj = 0; pj < passes.size(); ++pj) {
                        if (pj == pi) continue;
                        Var s = scalar_mul(matmul(normalize_rows(passes[pj].fwd.embeddings()),
                                                  transpose(q)),
                                           1.0 / lcfg.temperature);
                        extra = extra ? concat_rows(*extra, s) : s;
                    }
                }
                try {
                    LossNodes nodes = combined_loss(tape, passes[pi].fwd, bound, unit.loss_labels,
                                                    lcfg, extra);
                    LossValues vals = loss_values(nodes);
                    if (!std::isfinite(vals.combined))
                        throw Divergence(detail::concat("divergence in graph '", unit.graph->id,
                                                        "' at step ", step));
                    batch_loss = batch_loss.valid() ? add(batch_loss, nodes.combined)
                                                    : nodes.combined;
                    ep_combined += vals.combined;
                    ep_objective += vals.objective;
                    ep_link += vals.link;
                    ++used;
                    ++ep_graphs;
                } catch (const OneClassGraph&) {
                    skipped_unit[passes[pi].unit] = true;  // backstop; prechecked above
                }
            }
            if (used == 0) continue;
            if (used > 1) batch_loss = scalar_mul(batch_loss, 1.0 / double(used));

            try {
                tape.backward(batch_loss);
                std::vector<Tensor*> ptensors;
                std::vector<const Tensor*> pgrads;
                auto vars = bound.all_vars();
                auto named_now = params.named_tensors();
                for (std::size_t i = 0; i < vars.size(); ++i) {
                    ptensors.push_back(named_now[i].second);
                    pgrads.push_back(&vars[i].grad());
                }
                adam.step(ptensors, pgrads, names, lr);
            } catch (const NumericError& e) {
                throw Divergence(detail::concat("divergence at step ", step, ": ", e.what()));
            }
            ++step;
        }

        report.skipped_units = 0;
        for (bool s : skipped_unit) report.skipped_units += s;
        if (report.skipped_units == units.size())
            throw Error("train: every training graph was skipped (no usable labels)");

        EpochRow row;
        row.epoch = epoch;
        row.lr = lr;
        row.combined = ep_graphs ? ep_combined / double(ep_graphs) : 0.0;
        row.objective = ep_graphs ? ep_objective / double(ep_graphs) : 0.0;
        row.link = ep_graphs ? ep_link / double(ep_graphs) : 0.0;

        MetricReport val = detail::evaluate_split(ds, params, lcfg, false);
        row.val_auc = val.auc;
        row.val_map = val.map;
        report.epochs.push_back(row);

        if (val.auc) {
            if (*val.auc > best_auc) {
                best_auc = *val.auc;
                report.chosen_epoch = epoch;
                report.best_params = params;
                report.valid_metrics = val;
                epochs_since_best = 0;
            } else {
                ++epochs_since_best;
            }
            if (tcfg.early_stop && epochs_since_best >= tcfg.patience) break;
        } else {
            // No scorable validation data: keep the latest parameters.
            report.chosen_epoch = epoch;
            report.best_params = params;
            report.valid_metrics = val;
        }
    }

    report.skipped_majority = report.skipped_units * 2 > report.total_units;
    report.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

/// Pre-training is the same loop run on a corrupt dataset whose labels are
/// the injection pseudo-labels; in-batch negatives default on when the batch
/// has more than one graph.
inline TrainReport pretrain(const Dataset& corrupt_ds, const ModelConfig& mcfg,
                            const LossConfig& lcfg, TrainConfig tcfg) {
    tcfg.regime = TrainConfig::Regime::pretrain;
    return train(corrupt_ds, mcfg, lcfg, tcfg);
}

/// Resumes from checkpoint parameters at the fine-tuning learning rate;
/// label_fraction subsamples the labeled training units.
inline TrainReport finetune(const ModelParams& checkpoint, const Dataset& ds,
                            const LossConfig& lcfg, TrainConfig tcfg) {
    tcfg.regime = TrainConfig::Regime::finetune;
    return train(ds, checkpoint.config, lcfg, tcfg, checkpoint);
}

}  // namespace gcad

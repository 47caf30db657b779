#pragma once

#include "tempokit/loss.hpp"
#include "tempokit/optimizer.hpp"
#include "tempokit/targets.hpp"
#include "tempokit/tcn.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace tempokit {

struct TrainItem {
    Spectrogram spec;
    FrameTargets targets;
};

struct EpochStats {
    int epoch = 0; // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

// Stop once the monitored loss has failed to improve (strictly) for
// `patience` consecutive epochs.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // returns true when training should stop after this observation
    bool observe(double loss) {
        ++epoch_;
        if (loss < best_) {
            best_ = loss;
            best_epoch_ = epoch_;
            streak_ = 0;
        } else {
            ++streak_;
        }
        return streak_ >= patience_;
    }

    bool improved() const { return streak_ == 0; }
    int best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    int patience_;
    int epoch_ = 0;
    int streak_ = 0;
    int best_epoch_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

template <typename Scalar>
struct TrainResult {
    TcnWeights<Scalar> weights; // snapshot at the best validation epoch
    std::vector<EpochStats> history;
    int best_epoch = 0;
};

template <typename Scalar>
double mean_eval_loss(const TcnWeights<Scalar>& weights, const std::vector<TrainItem>& items) {
    double acc = 0.0;
    for (const auto& item : items) {
        const auto out = forward(weights, item.spec);
        acc += static_cast<double>(multitask_loss(out, item.targets).total);
    }
    return acc / static_cast<double>(items.size());
}

// Sequences are fed one at a time (batch size 1, variable lengths accepted)
// in seeded shuffled order. Early stopping monitors the validation loss, or
// the training loss when no validation items are given. Single-threaded and
// deterministic for a fixed seed.
template <typename Scalar>
TrainResult<Scalar> train(const TcnWeights<Scalar>& init, const std::vector<TrainItem>& dataset,
                          const std::vector<TrainItem>& validation, const TrainingConfig& cfg) {
    cfg.validate();
    if (dataset.empty()) raise(Errc::empty_dataset, "no training items");

    TrainResult<Scalar> result;
    result.weights = init;
    TcnWeights<Scalar> current = init;
    RAdamLookahead<Scalar> optimizer(current, cfg);

    Rng seeder(cfg.seed);
    Rng shuffle_rng = seeder.split(0x01);
    Rng dropout_rng = seeder.split(0x02);

    EarlyStopper stopper(cfg.early_stop_patience);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    ForwardCache<Scalar> cache;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double train_acc = 0.0;
        for (std::size_t idx : order) {
            const TrainItem& item = dataset[idx];
            const auto out = forward(current, item.spec, true, &dropout_rng, &cache);
            const auto loss = multitask_loss(out, item.targets);
            if (!std::isfinite(static_cast<double>(loss.total))) {
                raise(Errc::diverged_loss, "non-finite training loss at epoch " +
                                               std::to_string(epoch));
            }
            train_acc += static_cast<double>(loss.total);
            auto grads = backward(current, cache, loss.d_beat_logits, loss.d_tempo_logits);
            optimizer.step(current, grads);
        }
        const double train_loss = train_acc / static_cast<double>(dataset.size());
        const double val_loss =
            validation.empty() ? train_loss : mean_eval_loss(current, validation);
        if (!std::isfinite(val_loss)) {
            raise(Errc::diverged_loss,
                  "non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.history.push_back({epoch, train_loss, val_loss});

        const bool stop = stopper.observe(val_loss);
        if (stopper.improved()) {
            result.weights = current;
            result.best_epoch = epoch;
        }
        if (stop) break;
    }
    return result;
}

inline void save_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) raise(Errc::file_not_found, "cannot open for writing: " + path);
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
    }
}

} // namespace tempokit

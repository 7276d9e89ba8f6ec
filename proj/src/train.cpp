#include "csr/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace csr {

void TrainSchedule::validate() const {
  if (batch_size < 1) throw ConfigError("schedule: batch size must be >= 1");
  if (epochs < 1) throw ConfigError("schedule: epochs must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("schedule: momentum must be in [0, 1)");
  if (!(lr_front > 0.0) || !(lr_last > 0.0) || !(lr_fc > 0.0))
    throw ConfigError("schedule: learning rates must be positive");
  if (val_interval < 1)
    throw ConfigError("schedule: validation interval must be >= 1");
}

TrainSchedule recon_schedule_defaults() { return TrainSchedule{}; }

TrainSchedule deblock_schedule_defaults() {
  TrainSchedule s;
  s.lr_front = 1e-3;
  s.lr_last = 1e-4;
  s.lr_fc = 1e-3;  // unused: the de-block net has no FC stage
  return s;
}

void save_train_log(const TrainLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  char line[160];
  for (const TrainRecord& r : log.records) {
    std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.3f\n", r.epoch, r.loss,
                  r.val_psnr, r.seconds);
    out << line;
  }
  if (!out) throw FormatError(path + ": short write");
}

namespace {

void check_provenance(const Network& net, const PatchDataset& ds,
                      const char* what) {
  if (ds.size() == 0) throw UsageError(std::string(what) + " is empty");
  if (ds.patch_size != net.desc.patch_size)
    throw ConfigError(std::string(what) + ": patch size does not match the "
                      "network");
  const bool wants_measurements = net.desc.has_fc;
  if (wants_measurements) {
    if (ds.kind != DatasetKind::Reconstruction ||
        ds.vec_inputs.size() != ds.size())
      throw ConfigError(std::string(what) +
                        ": reconstruction network needs measurement inputs");
    if (ds.vec_inputs[0].values.size() !=
        static_cast<std::size_t>(net.fc.in_len))
      throw ConfigError(std::string(what) + ": measurement length does not "
                        "match the network");
  } else {
    if (ds.kind == DatasetKind::Reconstruction ||
        ds.map_inputs.size() != ds.size())
      throw ConfigError(std::string(what) +
                        ": de-block network needs image inputs");
  }
}

FeatureMap forward_sample(const Network& net, const PatchDataset& ds,
                          std::size_t idx, NetForwardCache* cache) {
  if (net.desc.has_fc) return net_forward(net, ds.vec_inputs[idx], cache);
  return net_forward(net, ds.map_inputs[idx], cache);
}

NetworkGrads zero_grads(const Network& net) {
  NetworkGrads g;
  if (net.desc.has_fc) {
    g.fc.weights.assign(net.fc.weights.size(), 0.0);
    g.fc.bias.assign(net.fc.bias.size(), 0.0);
  }
  g.stages.resize(net.stages.size());
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    g.stages[i].weights.assign(net.stages[i].weights.size(), 0.0);
    g.stages[i].bias.assign(net.stages[i].bias.size(), 0.0);
  }
  return g;
}

void accumulate_into(NetworkGrads& total, const NetworkGrads& part) {
  auto add = [](std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  };
  add(total.fc.weights, part.fc.weights);
  add(total.fc.bias, part.fc.bias);
  for (std::size_t s = 0; s < total.stages.size(); ++s) {
    add(total.stages[s].weights, part.stages[s].weights);
    add(total.stages[s].bias, part.stages[s].bias);
  }
}

// Per-sample work runs in index-slot groups of fixed size: the reduction
// order never depends on the thread count, so training is bit-reproducible
// at any parallelism degree.
constexpr std::size_t kGradGroup = 16;

}  // namespace

OptimState make_optimizer(const Network& net, const TrainSchedule& sched) {
  sched.validate();
  OptimState opt;
  opt.momentum = sched.momentum;
  auto add_layer = [&opt](double lr, std::size_t weights, std::size_t bias) {
    opt.layer_lr.push_back(lr);
    opt.velocity.emplace_back(weights, 0.0);
    opt.layer_lr.push_back(lr);
    opt.velocity.emplace_back(bias, 0.0);
  };
  if (net.desc.has_fc)
    add_layer(sched.lr_fc, net.fc.weights.size(), net.fc.bias.size());
  for (std::size_t i = 0; i < net.stages.size(); ++i) {
    const double lr = net.desc.stages[i].out_channels == 1 ? sched.lr_last
                                                           : sched.lr_front;
    add_layer(lr, net.stages[i].weights.size(), net.stages[i].bias.size());
  }
  return opt;
}

double validate(const Network& net, const PatchDataset& valset, int threads) {
  check_provenance(net, valset, "validation set");
  std::vector<double> scores(valset.size());
  parallel_for(valset.size(), threads, [&](std::size_t i) {
    const FeatureMap pred = forward_sample(net, valset, i, nullptr);
    scores[i] = psnr(to_image(pred), to_image(valset.targets[i]));
  });
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

TrainLog train(Network& net, const PatchDataset& dataset,
               const TrainSchedule& sched, const PatchDataset& valset,
               int threads) {
  sched.validate();
  check_provenance(net, dataset, "training set");
  check_provenance(net, valset, "validation set");

  OptimState opt = make_optimizer(net, sched);
  std::mt19937_64 shuffle_rng(sched.shuffle_seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainLog log;
  double best = -std::numeric_limits<double>::infinity();
  Network best_net = net;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 1; epoch <= sched.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batch_count = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(sched.batch_size)) {
      const std::size_t k =
          std::min(order.size() - start,
                   static_cast<std::size_t>(sched.batch_size));
      const double inv_k = 1.0 / static_cast<double>(k);

      NetworkGrads total = zero_grads(net);
      double batch_loss = 0.0;
      std::vector<NetworkGrads> slot_grads(std::min(kGradGroup, k));
      std::vector<double> slot_loss(slot_grads.size());
      for (std::size_t g0 = 0; g0 < k; g0 += kGradGroup) {
        const std::size_t gn = std::min(kGradGroup, k - g0);
        parallel_for(gn, threads, [&](std::size_t j) {
          const std::size_t idx = order[start + g0 + j];
          NetForwardCache cache;
          const FeatureMap pred = forward_sample(net, dataset, idx, &cache);
          LossResult lr = mse_loss(pred, dataset.targets[idx]);
          slot_loss[j] = lr.loss;
          for (double& v : lr.grad.data) v *= inv_k;
          slot_grads[j] = net_backward(net, lr.grad, cache, 1);
        });
        for (std::size_t j = 0; j < gn; ++j) {
          batch_loss += slot_loss[j];
          accumulate_into(total, slot_grads[j]);
        }
      }
      batch_loss *= inv_k;
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite training loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_count));
      epoch_loss += batch_loss;
      ++batch_count;

      const std::vector<ParamSlot> slots = parameter_slots(net, &total);
      for (std::size_t s = 0; s < slots.size(); ++s)
        sgd_step(*slots[s].params, *slots[s].grads, opt.velocity[s],
                 opt.layer_lr[s], opt.momentum);
    }

    if (epoch % sched.val_interval == 0 || epoch == sched.epochs) {
      const double score = validate(net, valset, threads);
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
      log.records.push_back(
          {epoch, epoch_loss / static_cast<double>(batch_count), score, secs});
      if (score > best) {
        best = score;
        best_net = net;
        log.best_epoch = epoch;
      }
    }
  }

  log.best_psnr = best;
  net = std::move(best_net);
  return log;
}

}  // namespace csr

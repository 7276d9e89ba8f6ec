#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csr/dataset.hpp"
#include "csr/network.hpp"

namespace csr {

// Momentum-SGD recipe. lr_front covers the first two conv layers of each
// residual module, lr_last each module-final conv layer; the FC layer takes
// its own rate (grouped with the front layers by default).
struct TrainSchedule {
  int batch_size = 128;
  int epochs = 200;
  double momentum = 0.9;
  double lr_front = 1e-5;
  double lr_last = 1e-6;
  double lr_fc = 1e-5;
  std::uint64_t shuffle_seed = 0;
  int val_interval = 1;  // epochs between validation passes

  void validate() const;
};

TrainSchedule recon_schedule_defaults();
TrainSchedule deblock_schedule_defaults();  // lr 1e-3 / 1e-4

struct TrainRecord {
  int epoch = 0;
  double loss = 0.0;      // mean training loss over the epoch's batches
  double val_psnr = 0.0;  // mean validation PSNR at this point
  double seconds = 0.0;   // wall time since training started
};

struct TrainLog {
  std::vector<TrainRecord> records;
  double best_psnr = 0.0;
  int best_epoch = 0;
};

// One "epoch,loss,val_psnr,seconds" line per record.
void save_train_log(const TrainLog& log, const std::string& path);

// One velocity buffer and learning rate per parameter tensor, in
// parameter_slots order. Weights and bias of a layer share its rate.
OptimState make_optimizer(const Network& net, const TrainSchedule& sched);

// Mean per-sample PSNR of the network's predictions against the targets.
double validate(const Network& net, const PatchDataset& valset,
                int threads = 1);

// Shuffled mini-batch SGD; aborts with NumericError on a non-finite loss.
// On return `net` holds the parameters with the best validation PSNR seen.
TrainLog train(Network& net, const PatchDataset& dataset,
               const TrainSchedule& sched, const PatchDataset& valset,
               int threads = 1);

}  // namespace csr

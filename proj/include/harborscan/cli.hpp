#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "harborscan/anchors.hpp"
#include "harborscan/augment.hpp"
#include "harborscan/decode.hpp"
#include "harborscan/tracking.hpp"

namespace harborscan {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

// Settings shared by every subcommand. A JSON config file provides the base
// values; command-line flags override them.
struct RunConfig {
  std::filesystem::path data_root;
  std::filesystem::path classes_file;
  std::filesystem::path out_dir = ".";
  DecodeParams decode;
  HeadConfig head;
  TrackerConfig tracker;
  ClusterConfig cluster;
  AugmentSpec augment;
  std::uint64_t split_seed = 0;
  double split_fraction = 0.25;
  std::vector<double> thresholds;  // empty: the default 0.50:0.05:0.95 sweep
};

// Keys: data, classes, out, seed, iou, k, decode{confidence,nms_iou},
// head{input_size,strides,boxes,classes}, tracker{...}, anchors{k,max_iter,seed,metric},
// augment{scale_min,scale_max,flip_probability,seed,pad_value,min_visibility},
// split{seed,fraction}, thresholds[...].
RunConfig load_run_config(const std::filesystem::path& p);

// Classes file used when none is given: the first of classes.names,
// obj.names, classes.txt found in the dataset root.
std::optional<std::filesystem::path> default_classes_file(const std::filesystem::path& root);

// harborscan <subcommand> [--config path] [flags]
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace harborscan

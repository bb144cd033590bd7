#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "recd/annotation_service.hpp"
#include "recd/annotator_sim.hpp"
#include "recd/correction.hpp"
#include "recd/dataset_io.hpp"
#include "recd/evaluation.hpp"
#include "recd/proposal_scoring.hpp"

namespace recd::cli {

/// Everything the subcommands can read from the JSON config file. Command
/// line flags override these values.
struct AppConfig {
  std::uint64_t seed = 0;
  SplitConfig split{};

  std::string method = "objectlab";
  ProposalConfig proposals{};

  AnnotatorModel simulator{};
  int annotator_pool = 200;

  Strategy strategy{BoxSource::DetectorProposals, Validation::HumanAndActivityAR, 0.5};
  CorrectionConfig correction{};
  Stage1Config stage1{};

  ServiceConfig service{};
  HttpConfig http{};
  int collect_timeout_s = 3600;

  DontCareRule dontcare_rule = DontCareRule::Iou;
  FoundErrorConfig found{};
  bool charge_full_vgt = false;
  std::size_t audit_images = 200;
};

/// Throws std::runtime_error naming the offending key on unknown keys or
/// wrongly typed values.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace recd::cli

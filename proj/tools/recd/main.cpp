// recd: command line front end for the label error correction toolkit.

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "config.hpp"
#include "recd/codec.hpp"

namespace fs = std::filesystem;
using namespace recd;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return in;
}

BoxesByImage pedestrian_boxes(const LabelSet& labels) {
  BoxesByImage out;
  for (const auto& [id, objects] : labels) out[id] = boxes_of_class(objects, kPedestrianClass);
  return out;
}

std::vector<Detection> detections_from(const LabelSet& labels) {
  std::vector<Detection> out;
  for (const auto& [id, objects] : labels) {
    for (const auto& o : objects) {
      if (o.class_name != kPedestrianClass) continue;
      if (!o.score) throw std::runtime_error("detection in " + id + " has no score field");
      out.push_back({id, o.bbox, *o.score});
    }
  }
  return out;
}

// Pedestrians walk; sitting people and cyclists are human but not pedestrians.
SyntheticWorld world_from_labels(const LabelSet& labels) {
  std::map<std::string, std::vector<WorldObject>> objects;
  for (const auto& [id, list] : labels) {
    auto& dst = objects[id];
    for (const auto& o : list) {
      if (o.class_name == kPedestrianClass) {
        dst.push_back({o.bbox, {1.0, 1.0, std::string(options::kSitting)}});
      } else if (o.class_name == "Person_sitting") {
        dst.push_back({o.bbox, {1.0, 0.0, std::string(options::kSitting)}});
      } else if (o.class_name == "Cyclist") {
        dst.push_back({o.bbox, {1.0, 0.0, std::string(options::kRiding)}});
      }
    }
  }
  return SyntheticWorld(std::move(objects));
}

// Keeps a copy of every task and response that passes through.
class RecordingSource : public ResponseSource {
 public:
  explicit RecordingSource(ResponseSource& inner) : inner_(inner) {}
  std::vector<AnnotatorResponse> collect(std::span<const Microtask> tasks) override {
    tasks_.insert(tasks_.end(), tasks.begin(), tasks.end());
    auto out = inner_.collect(tasks);
    responses_.insert(responses_.end(), out.begin(), out.end());
    return out;
  }
  std::vector<Microtask> tasks_;
  std::vector<AnnotatorResponse> responses_;

 private:
  ResponseSource& inner_;
};

void write_ledger(const fs::path& path, const CostLedger& ledger) {
  auto out = open_out(path);
  out << "task_id,kind,millis\n";
  for (const auto& e : ledger.entries()) out << e.task_id << ',' << e.kind << ',' << e.millis << '\n';
}

std::vector<SoftLabeledObject> read_sidecar(const fs::path& path) {
  auto in = open_in(path);
  return read_softlabel_sidecar(in);
}

std::vector<SoftLabeledObject> aggregate_responses(const std::vector<Microtask>& tasks,
                                                   const std::vector<AnnotatorResponse>& responses,
                                                   double z) {
  struct Subject {
    const Microtask* first = nullptr;
    std::vector<std::string> task_ids;
    std::vector<AnnotatorResponse> primary, human, activity;
    bool refined = false;
  };
  std::map<std::string, const Microtask*> by_id;
  std::vector<std::string> order;
  std::map<std::string, Subject> subjects;
  for (const auto& t : tasks) {
    if (!is_semantic(t.kind)) continue;
    by_id[t.task_id] = &t;
    const std::string key = t.subject_id.empty() ? t.task_id : t.subject_id;
    auto& s = subjects[key];
    if (s.first == nullptr) {
      s.first = &t;
      order.push_back(key);
    }
    s.task_ids.push_back(t.task_id);
    if (t.task_id.size() >= 3 && t.task_id.compare(t.task_id.size() - 3, 3, "/ar") == 0) s.refined = true;
  }
  for (const auto& r : responses) {
    const auto it = by_id.find(r.task_id);
    if (it == by_id.end()) continue;
    const auto& t = *it->second;
    auto& s = subjects[t.subject_id.empty() ? t.task_id : t.subject_id];
    if (t.kind == MicrotaskKind::IsPedestrian) s.primary.push_back(r);
    if (t.kind == MicrotaskKind::IsHuman) s.human.push_back(r);
    if (t.kind == MicrotaskKind::Activity) s.activity.push_back(r);
  }
  std::vector<SoftLabeledObject> out;
  for (const auto& key : order) {
    const auto& s = subjects[key];
    if (!s.first->bbox) continue;
    SoftLabel label = s.primary.empty() && !(s.human.empty() && s.activity.empty())
                          ? label_from_responses(Validation::HumanAndActivity22, s.human, s.activity, z)
                          : label_from_responses(Validation::IsPedestrian11, s.primary, {}, z);
    label.refined = s.refined;
    out.push_back({s.first->image_id, key, *s.first->bbox, label, s.task_ids, 1, {}});
  }
  return out;
}

std::atomic<HttpServer*> g_server{nullptr};

void handle_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recd: turn detected label errors into corrected labels"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  cli::AppConfig cfg;
  app.parse_complete_callback([&] {
    if (!config_path.empty()) cfg = cli::load_config(config_path);
  });

  // Flags below default to "unset" so config values survive unless overridden.
  std::optional<std::uint64_t> seed;
  std::optional<double> accuracy;
  std::optional<std::string> validation;
  std::optional<double> threshold;

  // split
  auto* split = app.add_subcommand("split", "Seeded pedestrian-stratified train/val split");
  std::string labels_dir, out_path;
  split->add_option("--labels", labels_dir, "KITTI label directory")->required();
  split->add_option("--out", out_path, "Split manifest (JSON)")->required();
  split->add_option("--seed", seed, "Random seed");
  std::optional<double> target, tolerance;
  split->add_option("--target", target, "Training fraction of images (default 0.8)");
  split->add_option("--tolerance", tolerance, "Allowed deviation of the pedestrian share (default 0.01)");

  // propose
  auto* prop = app.add_subcommand(
      "propose",
      "Rank candidate label errors.\nMethods: objectness, objectlab, metadetect. The instance-wise "
      "loss method (instance-loss) is not supported: it needs per-box training losses from the "
      "detector, and requesting it exits with an error.");
  std::string det_dir, gt_dir;
  std::optional<std::string> method;
  prop->add_option("--method", method, "objectness | objectlab | metadetect | instance-loss (unsupported)");
  prop->add_option("--detections", det_dir, "KITTI directory of detections with scores")->required();
  prop->add_option("--gt", gt_dir, "KITTI directory of the original labels")->required();
  prop->add_option("--out", out_path, "Proposals (JSON lines)")->required();
  prop->add_option("--seed", seed, "Seed for the meta-classifier folds");
  std::optional<double> min_score;
  prop->add_option("--min-score", min_score, "Drop detections below this score");
  bool no_nms = false;
  prop->add_flag("--no-nms", no_nms, "Skip per-image NMS");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation service over HTTP");
  std::string log_path, tasks_path, image_dir, static_dir;
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<double> lease_minutes;
  serve->add_option("--log", log_path, "Event log (JSON lines); replayed if present")->required();
  serve->add_option("--tasks", tasks_path, "Microtasks to enqueue (JSON lines)");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port (0 picks one)");
  serve->add_option("--images", image_dir, "Directory of <image_id>.png/.jpg files");
  serve->add_option("--static", static_dir, "Web UI bundle directory");
  serve->add_option("--lease-minutes", lease_minutes, "Lease before a served task is recycled");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Answer validation tasks for proposals with simulated annotators");
  std::string proposals_path, truth_dir, responses_out;
  sim->add_option("--proposals", proposals_path, "Proposals (JSON lines)")->required();
  sim->add_option("--truth", truth_dir, "KITTI directory with the planted truth")->required();
  sim->add_option("--tasks-out", tasks_path, "Write the generated tasks here")->required();
  sim->add_option("--responses-out", responses_out, "Write the responses here")->required();
  sim->add_option("--validation", validation, "is_pedestrian_11 | human_activity_22 | human_activity_ar | vgt_full");
  sim->add_option("--accuracy", accuracy, "Annotator accuracy");
  sim->add_option("--seed", seed, "Simulator seed");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "Turn task responses into soft labels");
  std::string responses_path;
  agg->add_option("--tasks", tasks_path, "Microtasks (JSON lines)")->required();
  agg->add_option("--responses", responses_path, "Responses (JSON lines), e.g. from /api/export")->required();
  agg->add_option("--out", out_path, "Soft-label sidecar (JSON lines)")->required();

  // correct
  auto* corr = app.add_subcommand("correct", "Review boxes and emit a corrected dataset");
  std::string service_log;
  std::optional<std::string> box_source;
  corr->add_option("--gt", gt_dir, "KITTI directory of the original labels")->required();
  corr->add_option("--out", out_path, "Output directory")->required();
  corr->add_option("--proposals", proposals_path, "Proposals to review (detector strategies)");
  corr->add_option("--box-source", box_source, "detector | direct_box | keypoint_to_box | combined");
  corr->add_option("--validation", validation, "Validation strategy");
  corr->add_option("--threshold", threshold, "Accept boxes with p at or above this");
  corr->add_option("--truth", truth_dir, "Simulate annotators against this KITTI truth");
  corr->add_option("--service-log", service_log, "Collect answers live through the annotation service");
  corr->add_option("--accuracy", accuracy, "Simulated annotator accuracy");
  corr->add_option("--seed", seed, "Simulator seed");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Count label errors against a validated ground truth");
  std::string vgt_path;
  std::optional<std::size_t> audit;
  eval->add_option("--vgt", vgt_path, "VGT soft-label sidecar")->required();
  eval->add_option("--gt", gt_dir, "KITTI directory of the original labels")->required();
  eval->add_option("--out", out_path, "Output directory")->required();
  eval->add_option("--audit", audit, "Also sample this many images for an external audit");
  eval->add_option("--seed", seed, "Audit sample seed");

  // curves
  auto* curves = app.add_subcommand("curves", "Cost versus found-error curves for proposal rankings");
  std::vector<std::string> proposal_files;
  std::string verdicts_path;
  curves->add_option("--proposals", proposal_files, "One or more proposal files")->required();
  curves->add_option("--vgt", vgt_path, "VGT soft-label sidecar")->required();
  curves->add_option("--gt", gt_dir, "KITTI directory of the original labels")->required();
  curves->add_option("--out", out_path, "Output directory")->required();
  curves->add_option("--verdicts", verdicts_path, "Strategy sidecar: judge reviewed boxes by it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (seed) {
    cfg.seed = *seed;
    cfg.split.seed = *seed;
    cfg.proposals.meta.seed = *seed;
    cfg.simulator.seed = *seed;
  }
  if (accuracy) cfg.simulator.accuracy = *accuracy;
  if (validation) cfg.strategy.validation = parse_validation(*validation);
  if (threshold) cfg.strategy.acceptance_threshold = *threshold;

  try {
    if (*split) {
      if (target) cfg.split.target_fraction = *target;
      if (tolerance) cfg.split.tolerance = *tolerance;
      const auto counts = pedestrian_counts(read_label_dir(labels_dir));
      const auto result = stratified_split(counts, cfg.split);
      auto out = open_out(out_path);
      write_split_manifest(out, result);
      const auto s = summarize_split(result, counts);
      std::cout << "train " << s.train_images << " images / " << s.train_pedestrians
                << " pedestrians, val " << s.val_images << " images / " << s.val_pedestrians
                << " pedestrians (" << result.attempts << " draws)\n";
    } else if (*prop) {
      if (method) cfg.method = *method;
      if (min_score) cfg.proposals.min_score = *min_score;
      if (no_nms) cfg.proposals.apply_nms = false;
      const auto m = parse_proposal_method(cfg.method);
      const auto proposals = propose(m, detections_from(read_label_dir(det_dir)),
                                     pedestrian_boxes(read_label_dir(gt_dir)), cfg.proposals);
      auto out = open_out(out_path);
      write_proposals(out, proposals);
      std::cout << proposals.size() << " proposals written to " << out_path << '\n';
    } else if (*serve) {
      if (host) cfg.http.host = *host;
      if (port) cfg.http.port = *port;
      if (!image_dir.empty()) cfg.http.image_dir = image_dir;
      if (!static_dir.empty()) cfg.http.static_dir = static_dir;
      if (lease_minutes) cfg.service.lease_ms = static_cast<std::int64_t>(*lease_minutes * 60000.0);
      AnnotationService service(log_path, cfg.service);
      if (!tasks_path.empty()) {
        auto in = open_in(tasks_path);
        const auto tasks = read_microtasks(in);
        std::cout << service.add_tasks(tasks) << " new tasks enqueued\n";
      }
      HttpServer server(service, cfg.http);
      g_server = &server;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "serving on http://" << cfg.http.host << ':' << cfg.http.port << std::endl;
      server.run();
      g_server = nullptr;
    } else if (*sim) {
      const auto world = world_from_labels(read_label_dir(truth_dir));
      auto in = open_in(proposals_path);
      const auto proposals = read_proposals(in);
      const auto boxes = review_boxes_from_proposals(proposals);
      SimulatedSource simulated(AnnotatorSimulator(cfg.simulator), world, cfg.annotator_pool);
      RecordingSource rec(simulated);
      const auto outcome = run_correction(cfg.strategy, boxes, rec, cfg.correction);
      auto tout = open_out(tasks_path);
      write_microtasks(tout, rec.tasks_);
      auto rout = open_out(responses_out);
      write_responses(rout, rec.responses_);
      std::cout << rec.tasks_.size() << " tasks, " << rec.responses_.size() << " responses, "
                << outcome.ledger.total_seconds() << " s of annotation\n";
    } else if (*agg) {
      auto tin = open_in(tasks_path);
      auto rin = open_in(responses_path);
      const auto labels = aggregate_responses(read_microtasks(tin), read_responses(rin), cfg.correction.z);
      auto out = open_out(out_path);
      write_softlabel_sidecar(out, labels);
      std::cout << labels.size() << " soft labels written to " << out_path << '\n';
    } else if (*corr) {
      if (box_source) cfg.strategy.box_source = parse_box_source(*box_source);
      const LabelSet original = read_label_dir(gt_dir);
      if (truth_dir.empty() == service_log.empty()) {
        throw std::runtime_error("give exactly one of --truth (simulated) or --service-log (live)");
      }
      std::unique_ptr<SyntheticWorld> world;
      std::unique_ptr<AnnotationService> service;
      std::unique_ptr<HttpServer> server;
      std::unique_ptr<ResponseSource> source;
      if (!truth_dir.empty()) {
        world = std::make_unique<SyntheticWorld>(world_from_labels(read_label_dir(truth_dir)));
        source = std::make_unique<SimulatedSource>(AnnotatorSimulator(cfg.simulator), *world,
                                                   cfg.annotator_pool);
      } else {
        service = std::make_unique<AnnotationService>(service_log, cfg.service);
        server = std::make_unique<HttpServer>(*service, cfg.http);
        std::cout << "collecting answers on port " << server->start() << std::endl;
        source = std::make_unique<ServiceResponseSource>(
            *service, std::chrono::seconds(cfg.collect_timeout_s));
      }

      std::vector<ReviewBox> boxes;
      if (cfg.strategy.box_source == BoxSource::DetectorProposals) {
        if (proposals_path.empty()) throw std::runtime_error("--proposals is required for detector boxes");
        auto in = open_in(proposals_path);
        boxes = review_boxes_from_proposals(read_proposals(in));
      } else {
        std::vector<std::string> images;
        for (const auto& [id, objects] : original) images.push_back(id);
        boxes = collect_boxes(cfg.strategy.box_source, images, *source, cfg.stage1);
      }
      const auto outcome = run_correction(cfg.strategy, boxes, *source, cfg.correction);
      const auto dataset = emit_corrected_dataset(outcome, original);
      write_label_dir(fs::path(out_path) / "labels", dataset.labels);
      auto side = open_out(fs::path(out_path) / "softlabels.jsonl");
      write_softlabel_sidecar(side, dataset.sidecar);
      write_ledger(fs::path(out_path) / "ledger.csv", outcome.ledger);
      std::cout << "accepted " << outcome.accepted.size() << ", rejected " << outcome.rejected.size()
                << ", unresolved " << outcome.unresolved.size() << ", refined "
                << outcome.refined_boxes << ", cost " << outcome.ledger.total_seconds() << " s\n";
      if (outcome.source_exhausted) std::cout << "warning: some tasks did not receive all answers\n";
      if (server) server->stop();
    } else if (*eval) {
      const auto vgt = group_by_image(read_sidecar(vgt_path));
      const auto gt = read_label_dir(gt_dir);
      auto grid = table3_grid();
      for (auto& g : grid) g.dontcare_rule = cfg.dontcare_rule;
      const auto reports = count_error_grid(vgt, gt, grid);
      auto out = open_out(fs::path(out_path) / "error_counts.csv");
      write_error_counts_csv(out, reports);
      for (const auto& r : reports) {
        std::cout << "p>=" << r.config.p_threshold << " h>=" << r.config.min_height
                  << (r.config.dontcare_excluded ? " dc-excluded" : " dc-kept")
                  << ": overlooked " << r.overlooked << ", misfitting " << r.misfitting
                  << ", fnr " << r.fnr << '\n';
      }
      const auto fp = false_positive_analysis(gt, vgt, cfg.found.p_threshold);
      std::cout << "original boxes the VGT doubts: " << fp.below_threshold << " of " << fp.gt_boxes
                << " (" << fp.without_partner << " without a VGT partner)\n";
      if (audit) {
        const auto sample = audit_sample(gt, *audit, cfg.seed, cfg.proposals.default_image.width,
                                         cfg.proposals.default_image.height);
        auto mout = open_out(fs::path(out_path) / "audit_manifest.json");
        write_audit_manifest(mout, sample);
      }
    } else if (*curves) {
      const auto vgt = group_by_image(read_sidecar(vgt_path));
      const auto gt = read_label_dir(gt_dir);
      std::map<std::pair<std::string, std::string>, SoftLabel> verdicts;
      if (!verdicts_path.empty()) {
        for (const auto& o : read_sidecar(verdicts_path)) verdicts[{o.image_id, to_string(o.bbox)}] = o.label;
      }
      CurveConfig cc;
      cc.found = cfg.found;
      cc.validation_seconds = cfg.correction.costs.vgt_full;
      if (cfg.charge_full_vgt) cc.stage1_seconds = cfg.correction.costs.combined_box;
      if (!verdicts_path.empty()) {
        cc.validation_seconds = cfg.correction.costs.validation_seconds(cfg.strategy.validation);
      }
      for (const auto& file : proposal_files) {
        auto in = open_in(file);
        const auto proposals = read_proposals(in);
        std::vector<CandidateBox> candidates;
        for (const auto& p : proposals) {
          CandidateBox c{p.image_id, p.bbox, p.error_probability, std::nullopt};
          if (const auto v = verdicts.find({p.image_id, to_string(p.bbox)}); v != verdicts.end()) {
            c.label = v->second;
          }
          candidates.push_back(std::move(c));
        }
        const std::string name =
            proposals.empty() ? fs::path(file).stem().string() : std::string(to_string(proposals.front().method));
        const auto thresholds = default_thresholds();
        const auto curve = cost_error_curve(candidates, thresholds, gt, vgt, cc);
        auto out = open_out(fs::path(out_path) / ("curve_" + name + ".csv"));
        write_curve_csv(out, curve);
        std::cout << name << ": " << curve.back().found_fn << " errors found for "
                  << curve.back().cost_seconds << " s at the lowest threshold\n";
      }
    }
  } catch (const UnsupportedMethod& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

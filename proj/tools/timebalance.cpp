// Copyright (c) 2026 The TimeBalance Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <CLI11.hpp>
#include <iostream>

#include <json.hpp>

#include "timebalance/balance.hpp"
#include "timebalance/config.hpp"
#include "timebalance/eval.hpp"
#include "timebalance/synthgen.hpp"
#include "timebalance/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

tb::Config load_config(const std::string& path) {
  tb::Config config = path.empty() ? tb::Config{} : tb::parse_config(fs::path(path));
  tb::apply_env_seed(config);
  return config;
}

struct LoadedData {
  tb::DatasetSplit split;
  std::vector<const tb::VideoInstance*> all;
};

LoadedData load_data(const std::string& root, double labeled_fraction, std::uint64_t seed,
                     int min_frames) {
  LoadedData d;
  d.split = tb::load_dataset(fs::path(root), {labeled_fraction, seed, min_frames});
  for (const auto& v : d.split.labeled) d.all.push_back(&v);
  for (const auto& v : d.split.unlabeled) d.all.push_back(&v);
  return d;
}

std::unique_ptr<tb::EncoderWeights> load_net(const std::string& path) {
  return tb::load_checkpoint(fs::path(path)).net;
}

int run_gen_synthetic(const std::string& config_path, const std::string& out) {
  const tb::Config config = load_config(config_path);
  const tb::SynthSpec spec = config.synth_spec();
  tb::gen_benchmark(spec, fs::path(out));
  std::cout << "wrote " << spec.num_classes() * spec.videos_per_class << " videos in "
            << spec.num_classes() << " classes to " << out << "\n";
  return 0;
}

int run_pretrain(const std::string& config_path, const std::string& objective,
                 const std::string& data, const std::string& out) {
  const tb::Config config = load_config(config_path);
  const auto obj = objective == "invariant" ? tb::PretrainObjective::Invariant
                                            : tb::PretrainObjective::Distinctive;
  const LoadedData d =
      load_data(data, 1.0, config.seed, config.n * config.f_pretrain);
  tb::pretrain_teacher(obj, d.all, static_cast<int>(d.split.class_names.size()), config,
                       fs::path(out));
  std::cout << "pretraining (" << objective << ") finished; final checkpoint: " << out
            << "/final.tbck\n";
  return 0;
}

int run_finetune(const std::string& config_path, const std::string& checkpoint,
                 const std::string& data, const std::string& out) {
  const tb::Config config = load_config(config_path);
  auto net = load_net(checkpoint);
  const LoadedData d = load_data(data, config.labeled_fraction, config.seed, config.f_student);
  tb::write_split_manifest(fs::path(out) / "split_manifest.txt", d.split);
  tb::finetune_teacher(*net, tb::instance_pointers(d.split.labeled), config, fs::path(out));
  std::cout << "finetuning finished; final checkpoint: " << out << "/final.tbck\n";
  return 0;
}

int run_compute_similarity(const std::string& config_path,
                           const std::vector<std::string>& teachers, const std::string& data,
                           const std::string& out) {
  const tb::Config config = load_config(config_path);
  const std::uint64_t inv_hash = tb::checkpoint_hash(teachers[0]);
  const std::uint64_t dist_hash = tb::checkpoint_hash(teachers[1]);
  if (auto cached = tb::maybe_load_score_cache(fs::path(out), inv_hash, dist_hash)) {
    std::cout << "score cache up to date (" << cached->records.size() << " records)\n";
    return 0;
  }
  auto inv = load_net(teachers[0]);
  auto dist = load_net(teachers[1]);
  if (inv->role() != tb::Role::InvariantTeacher)
    throw tb::DataError("first teacher checkpoint does not carry the invariant role");
  if (dist->role() != tb::Role::DistinctiveTeacher)
    throw tb::DataError("second teacher checkpoint does not carry the distinctive role");
  const LoadedData d = load_data(data, 1.0, config.seed, 1);
  tb::ScoringOptions options{config.n, config.f_pretrain, config.crop_size};
  const tb::ScoreCache cache =
      tb::precompute_scores(*inv, *dist, d.all, options, inv_hash, dist_hash);
  tb::save_score_cache(fs::path(out), cache);
  std::cout << "wrote " << cache.records.size() << " similarity records to " << out << "\n";
  return 0;
}

int run_train_student(const std::string& config_path, const std::string& data,
                      const std::vector<std::string>& teachers, const std::string& scores,
                      const std::string& init, const std::string& out) {
  const tb::Config config = load_config(config_path);
  auto inv = load_net(teachers[0]);
  auto dist = load_net(teachers[1]);
  const LoadedData d = load_data(data, config.labeled_fraction, config.seed, config.f_student);
  fs::create_directories(fs::path(out));
  tb::write_split_manifest(fs::path(out) / "split_manifest.txt", d.split);

  tb::StudentSetup setup;
  setup.teacher_invariant = inv.get();
  setup.teacher_distinctive = dist.get();
  setup.teacher_invariant_hash = tb::checkpoint_hash(teachers[0]);
  setup.teacher_distinctive_hash = tb::checkpoint_hash(teachers[1]);
  const tb::ScoreCache cache = tb::load_score_cache(fs::path(scores));
  setup.scores = &cache;

  std::unique_ptr<tb::EncoderWeights> init_net;
  if (config.student_init == "ssl") {
    if (init.empty())
      throw tb::ConfigError("student_init = ssl requires --init <ssl checkpoint>");
    init_net = load_net(init);
    setup.init_weights = init_net.get();
  }
  tb::train_student(setup, tb::instance_pointers(d.split.labeled),
                    tb::instance_pointers(d.split.unlabeled),
                    static_cast<int>(d.split.class_names.size()), config, fs::path(out));
  std::cout << "student training finished; final checkpoint: " << out << "/final.tbck\n";
  return 0;
}

int run_evaluate(const std::string& config_path, const std::string& checkpoint,
                 const std::string& data, const std::string& out) {
  const tb::Config config = load_config(config_path);
  auto net = load_net(checkpoint);
  const LoadedData d = load_data(data, 1.0, config.seed, config.f_student);
  const tb::EvalProtocol protocol{config.eval_num_clips, config.eval_num_scales,
                                  config.f_student, config.crop_size};
  const tb::EvalReport report = tb::evaluate(*net, d.all, protocol);
  json j{{"top1", report.top1},
         {"num_videos", report.num_videos},
         {"protocol",
          {{"num_clips", protocol.num_clips}, {"num_scales", protocol.num_scales}}}};
  json per_class = json::object();
  for (const auto& [cls, acc] : report.per_class)
    per_class[d.split.class_names[static_cast<std::size_t>(cls)]] = acc;
  j["per_class"] = per_class;
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::ofstream os(out);
    os << j.dump(2) << "\n";
    if (!os) throw tb::DataError("cannot write report: " + out);
  }
  return 0;
}

int run_classwise_delta(const std::string& config_path, const std::string& distinctive,
                        const std::string& invariant, const std::string& data, int k,
                        const std::string& out) {
  const tb::Config config = load_config(config_path);
  auto dist = load_net(distinctive);
  auto inv = load_net(invariant);
  const LoadedData d = load_data(data, 1.0, config.seed, config.f_student);
  const tb::EvalProtocol protocol{config.eval_num_clips, config.eval_num_scales,
                                  config.f_student, config.crop_size};
  const auto report_d = tb::evaluate(*dist, d.all, protocol);
  const auto report_i = tb::evaluate(*inv, d.all, protocol);
  const auto deltas = tb::classwise_delta(report_d, report_i);
  const int kk = std::min<int>(k, static_cast<int>(deltas.size()));
  tb::write_delta_csv(fs::path(out), deltas, kk);
  std::cout << "wrote classwise deltas to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised action recognition on synthetic video benchmarks"};
  app.require_subcommand(1);

  std::string config_path, data, out, objective, checkpoint, scores, init;
  std::string teacher_inv, teacher_dist, distinctive, invariant;
  int k = 25;

  auto* gen = app.add_subcommand("gen-synthetic", "Generate the synthetic video benchmark");
  gen->add_option("--config,--spec", config_path, "configuration file");
  gen->add_option("--out", out, "output corpus directory")->required();

  auto* pre = app.add_subcommand("pretrain", "Self-supervised teacher pretraining");
  pre->add_option("--config", config_path, "configuration file");
  pre->add_option("--objective", objective, "invariant | distinctive")
      ->required()
      ->check(CLI::IsMember({"invariant", "distinctive"}));
  pre->add_option("--data", data, "dataset root")->required();
  pre->add_option("--out", out, "output directory")->required();

  auto* fin = app.add_subcommand("finetune-teacher", "Supervised teacher finetuning");
  fin->add_option("--config", config_path, "configuration file");
  fin->add_option("--checkpoint", checkpoint, "SSL checkpoint to finetune")->required();
  fin->add_option("--data", data, "dataset root")->required();
  fin->add_option("--out", out, "output directory")->required();

  auto* sim = app.add_subcommand("compute-similarity", "Precompute similarity scores");
  sim->add_option("--config", config_path, "configuration file");
  std::vector<std::string> teachers;
  sim->add_option("--teachers", teachers, "SSL teacher checkpoints: invariant distinctive")
      ->expected(2)
      ->required();
  sim->add_option("--data", data, "dataset root")->required();
  sim->add_option("--out", out, "cache file path")->required();

  auto* stu = app.add_subcommand("train-student", "Semi-supervised student training");
  stu->add_option("--config", config_path, "configuration file");
  stu->add_option("--data", data, "dataset root")->required();
  std::vector<std::string> stu_teachers;
  stu->add_option("--teachers", stu_teachers,
                  "finetuned teacher checkpoints: invariant distinctive")
      ->expected(2)
      ->required();
  stu->add_option("--scores", scores, "similarity score cache")->required();
  stu->add_option("--init", init, "SSL checkpoint for student initialization");
  stu->add_option("--out", out, "output directory")->required();

  auto* eva = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
  eva->add_option("--config", config_path, "configuration file");
  eva->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
  eva->add_option("--data", data, "dataset root")->required();
  eva->add_option("--out", out, "optional JSON report path");

  auto* cwd = app.add_subcommand("classwise-delta",
                                 "Classwise accuracy deltas between two teachers");
  cwd->add_option("--config", config_path, "configuration file");
  cwd->add_option("--distinctive", distinctive, "finetuned distinctive teacher")->required();
  cwd->add_option("--invariant", invariant, "finetuned invariant teacher")->required();
  cwd->add_option("--data", data, "dataset root")->required();
  cwd->add_option("--k", k, "extreme classes per side");
  cwd->add_option("--out", out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen_synthetic(config_path, out);
    if (pre->parsed()) return run_pretrain(config_path, objective, data, out);
    if (fin->parsed()) return run_finetune(config_path, checkpoint, data, out);
    if (sim->parsed()) return run_compute_similarity(config_path, teachers, data, out);
    if (stu->parsed())
      return run_train_student(config_path, data, stu_teachers, scores, init, out);
    if (eva->parsed()) return run_evaluate(config_path, checkpoint, data, out);
    if (cwd->parsed())
      return run_classwise_delta(config_path, distinctive, invariant, data, k, out);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const tb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const tb::ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const tb::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const tb::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

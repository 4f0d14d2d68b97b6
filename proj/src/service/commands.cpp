// Copyright 2026 The Fisher Probe Authors
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

#include "fisher_probe/cli.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fisher_probe/error.hpp"
#include "fisher_probe/parallel.hpp"
#include "fisher_probe/probe.hpp"
#include "fisher_probe/records.hpp"
#include "fisher_probe/service.hpp"

namespace fisher_probe::cli {

namespace {

using records::format_number;

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw IoError(what + " not found: " + path.string());
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

models::ModelKind parse_kind(const std::string& name) {
  if (name == "mlp") return models::ModelKind::kMlp;
  if (name == "textcnn") return models::ModelKind::kTextCnn;
  throw InvalidArgument("unknown model '" + name + "'; expected mlp or textcnn");
}

std::string jsonl(const std::vector<nlohmann::json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + '\n';
  return out;
}

// At least 99% of `total` items must succeed.
bool enough_succeeded(std::size_t ok, std::size_t total) { return total > 0 && ok * 100 >= total * 99; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<datakit::Example> load_examples(const DataOptions& data, const datakit::LabelMap& labels) {
  if (!data.data) throw InvalidArgument("--data is required");
  require_file(*data.data, "dataset");
  return datakit::load_dataset(*data.data, datakit::parse_format(data.format), labels);
}

}  // namespace

trainer::TrainConfig train_config(models::ModelKind kind, const TrainOverrides& o, std::uint64_t seed) {
  trainer::TrainConfig c =
      kind == models::ModelKind::kMlp ? trainer::default_mlp_config() : trainer::default_textcnn_config();
  if (o.optimizer) {
    if (*o.optimizer == "sgd") c.optimizer = trainer::OptimizerKind::kSgd;
    else if (*o.optimizer == "adam") c.optimizer = trainer::OptimizerKind::kAdam;
    else throw InvalidArgument("unknown optimizer '" + *o.optimizer + "'; expected sgd or adam");
  }
  if (o.learning_rate) c.learning_rate = *o.learning_rate;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.patience) c.patience = *o.patience;
  if (o.valid_fraction) c.valid_fraction = *o.valid_fraction;
  c.seed = seed;
  trainer::validate(c);
  return c;
}

datakit::Classifier load_classifier(const models::Checkpoint& ckpt, const std::optional<fs::path>& embeddings) {
  datakit::Classifier classifier{ckpt.model, nullptr};
  if (ckpt.model.spec.kind != models::ModelKind::kTextCnn) return classifier;
  if (!embeddings) throw InvalidArgument("--embeddings is required for a textcnn checkpoint");
  require_file(*embeddings, "embedding file");
  auto table = std::make_shared<models::EmbeddingTable>(datakit::load_embeddings(*embeddings));
  if (ckpt.vocab_hash && *ckpt.vocab_hash != table->fingerprint()) {
    throw InvalidArgument("embedding file " + embeddings->string() + " (hash " + models::hex64(table->fingerprint()) +
                          ") does not match the checkpoint vocabulary (hash " + models::hex64(*ckpt.vocab_hash) + ")");
  }
  classifier.embeddings = std::move(table);
  return classifier;
}

datakit::LabelMap resolve_labels(const std::optional<std::string>& labels, const models::Checkpoint& ckpt) {
  datakit::LabelMap map;
  if (labels) {
    map = datakit::LabelMap::parse(*labels);
  } else if (ckpt.metadata.contains("labels")) {
    map = datakit::LabelMap(ckpt.metadata.at("labels").get<std::vector<std::string>>());
  } else {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < ckpt.model.num_classes(); ++c) names.push_back(std::to_string(c));
    map = datakit::LabelMap(std::move(names));
  }
  if (map.size() != ckpt.model.num_classes()) {
    throw InvalidArgument("label map has " + std::to_string(map.size()) + " classes but the model has " +
                          std::to_string(ckpt.model.num_classes()));
  }
  return map;
}

// ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const models::ModelKind kind = parse_kind(o.model);
    const trainer::TrainConfig config = train_config(kind, o.overrides, o.seed);

    std::vector<datakit::Example> examples;
    datakit::LabelMap labels;
    std::shared_ptr<const models::EmbeddingTable> table;
    nlohmann::json data_meta;
    if (o.synthetic) {
      if (kind != models::ModelKind::kMlp) throw InvalidArgument("--synthetic trains the mlp model");
      datakit::GaussianMixtureSpec mix;
      mix.n_per_class = o.n_per_class;
      mix.seed = o.seed;
      examples = datakit::sample_mixture(mix);
      labels = datakit::LabelMap({"0", "1"});
      data_meta = {{"source", "gaussian_mixture"}, {"seed", o.seed}, {"n_per_class", o.n_per_class}};
    } else {
      labels = datakit::LabelMap::parse(o.data.labels.value_or("neg,pos"));
      if (kind == models::ModelKind::kTextCnn) {
        if (!o.data.embeddings) throw InvalidArgument("--embeddings is required for textcnn");
        require_file(*o.data.embeddings, "embedding file");
      }
      examples = load_examples(o.data, labels);
      if (kind == models::ModelKind::kTextCnn) {
        table = std::make_shared<models::EmbeddingTable>(datakit::load_embeddings(*o.data.embeddings));
      }
      data_meta = {{"source", "file"}, {"format", o.data.format}};
    }

    models::ModelSpec spec = kind == models::ModelKind::kMlp
                                 ? models::default_mlp_spec()
                                 : models::default_textcnn_spec(table->dim, labels.size());
    if (kind == models::ModelKind::kMlp) {
      spec.num_classes = labels.size();
      spec.layer_widths.back() = labels.size();
    }
    trainer::TrainResult result = trainer::train(spec, examples, table, config);

    models::Checkpoint ckpt{result.model, std::nullopt, nlohmann::json::object()};
    if (table) ckpt.vocab_hash = table->fingerprint();
    ckpt.metadata = {{"labels", labels.names()},
                     {"data", data_meta},
                     {"train_config", trainer::to_json(config)},
                     {"best_epoch", result.report.best_epoch},
                     {"best_valid_accuracy", result.report.best_valid_accuracy}};
    if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
    models::save_checkpoint(o.out, ckpt);
    const fs::path report = o.report.value_or(fs::path(o.out.string() + ".report.json"));
    records::write_text(report, trainer::to_json(result.report).dump(2) + '\n');

    out << "trained " << o.model << " on " << result.report.train_size << " examples ("
        << result.report.valid_size << " held out), best epoch " << result.report.best_epoch << '\n';
    out << "valid accuracy: " << format_number(result.report.best_valid_accuracy) << '\n';
    out << "checkpoint: " << o.out.string() << '\n';
    return 0;
  });
}

int cmd_score(const ScoreOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(o.checkpoint, "checkpoint");
    const models::Checkpoint ckpt = models::load_checkpoint(o.checkpoint);
    const datakit::Classifier classifier = load_classifier(ckpt, o.data.embeddings);
    const auto examples = load_examples(o.data, resolve_labels(o.data.labels, ckpt));
    if (examples.empty()) throw EmptyInputError("dataset is empty");

    const auto entries = fim::score_dataset(classifier, examples);
    std::vector<const fim::FimResult*> ok;
    for (const auto& e : entries) {
      if (e.ok()) ok.push_back(&*e.result);
      else err << "warning: example '" << e.id << "' failed: " << e.error << '\n';
    }
    if (o.sort) {
      std::stable_sort(ok.begin(), ok.end(),
                       [](const fim::FimResult* a, const fim::FimResult* b) { return a->lambda_max > b->lambda_max; });
    }
    std::vector<nlohmann::json> rows;
    std::vector<double> lambdas;
    for (const auto* r : ok) {
      rows.push_back(records::score_record(*r, o.top_eigvec));
      lambdas.push_back(r->lambda_max);
    }
    if (o.out.has_parent_path()) ensure_dir(o.out.parent_path());
    records::write_text(o.out, jsonl(rows));

    out << "scored " << ok.size() << "/" << entries.size() << " examples -> " << o.out.string() << '\n';
    if (!lambdas.empty()) {
      out << "lambda_max min=" << format_number(*std::min_element(lambdas.begin(), lambdas.end()))
          << " median=" << format_number(median(lambdas))
          << " max=" << format_number(*std::max_element(lambdas.begin(), lambdas.end())) << '\n';
    }
    return enough_succeeded(ok.size(), entries.size()) ? 0 : 1;
  });
}

int cmd_pairs(const PairsOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(o.checkpoint, "checkpoint");
    require_file(o.pairs, "pairs file");
    const models::Checkpoint ckpt = models::load_checkpoint(o.checkpoint);
    const datakit::Classifier classifier = load_classifier(ckpt, o.embeddings);
    const auto pairs = datakit::load_pairs(o.pairs, resolve_labels(o.labels, ckpt));
    if (pairs.empty()) throw EmptyInputError("pairs file is empty");
    std::optional<std::vector<fim::FimResult>> base;
    if (o.overlap) {
      require_file(*o.overlap, "scored file");
      base = records::read_scored_jsonl(*o.overlap);
      if (base->empty()) throw EmptyInputError("scored file " + o.overlap->string() + " is empty");
    }

    const probe::PairReport report = probe::score_pairs(classifier, pairs, o.threshold);
    for (const auto& f : report.failures) err << "warning: pair '" << f.id << "' failed: " << f.message << '\n';

    std::vector<nlohmann::json> rows;
    std::vector<double> original;
    std::vector<double> perturbed;
    for (const auto& r : report.records) {
      rows.push_back(records::pair_record(r));
      original.push_back(r.lambda_original);
      perturbed.push_back(r.lambda_perturbed);
    }
    ensure_dir(o.out_dir);
    records::write_text(o.out_dir / "pairs.jsonl", jsonl(rows));
    records::write_text(o.out_dir / "summary.json",
                        records::delta_summary(report.stats, report.failures.size()).dump(2) + '\n');
    if (!report.records.empty()) {
      const auto hist = probe::histogram_overlap(original, perturbed, o.bins);
      records::write_text(o.out_dir / "histogram.csv", records::histogram_csv(hist));
    }
    if (base && !perturbed.empty()) {
      std::vector<double> base_lambdas;
      for (const auto& r : *base) base_lambdas.push_back(r.lambda_max);
      const auto overlap = probe::histogram_overlap(base_lambdas, perturbed, o.bins);
      records::write_text(o.out_dir / "overlap.json", records::overlap_json(overlap).dump(2) + '\n');
      out << "overlap(base, perturbed): " << format_number(overlap.overlap_percent) << "%\n";
    }

    const auto& s = report.stats;
    out << "pairs scored " << report.records.size() << "/" << pairs.size() << '\n';
    out << "delta mean=" << format_number(s.mean) << " std=" << format_number(s.std) << " frac_le_"
        << format_number(s.threshold) << "=" << format_number(s.frac_le_threshold) << " frac_gt_"
        << format_number(s.threshold) << "=" << format_number(s.frac_gt_threshold) << '\n';
    return enough_succeeded(report.records.size(), pairs.size()) ? 0 : 1;
  });
}

SyntheticRun run_synthetic(const SyntheticOptions& o) {
  if (o.top == 0) throw InvalidArgument("--top must be positive");
  SyntheticRun run;
  datakit::GaussianMixtureSpec mix;
  mix.n_per_class = o.n_per_class;
  mix.seed = o.seed;
  run.points = datakit::sample_mixture(mix);
  run.config = train_config(models::ModelKind::kMlp, o.overrides, o.seed);
  run.trained = trainer::train(models::default_mlp_spec(), run.points, nullptr, run.config);

  const datakit::Classifier classifier{run.trained.model, nullptr};
  const auto entries = fim::score_dataset(classifier, run.points);
  run.scores.reserve(entries.size());
  for (const auto& e : entries) {
    if (!e.ok()) throw NumericError("scoring point '" + e.id + "' failed: " + e.error);
    run.scores.push_back(*e.result);
  }
  run.boundary_distances.resize(run.points.size());
  const int threads = parallel::thread_limit();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(run.points.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    run.boundary_distances[k] = probe::boundary_distance(run.trained.model, *run.points[k].point, o.radius);
  }
  std::vector<double> lambdas;
  for (const auto& s : run.scores) lambdas.push_back(s.lambda_max);
  run.spearman = probe::spearman(lambdas, run.boundary_distances);

  std::vector<std::size_t> order(run.points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] > lambdas[b]; });
  order.resize(std::min(o.top, order.size()));
  run.top = std::move(order);
  return run;
}

int cmd_synthetic(const SyntheticOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SyntheticRun run = run_synthetic(o);
    ensure_dir(o.out_dir);

    std::string points = "x1,x2,label,lambda_max,boundary_distance\n";
    for (std::size_t i = 0; i < run.points.size(); ++i) {
      const auto& p = *run.points[i].point;
      points += format_number(p[0]) + ',' + format_number(p[1]) + ',' + std::to_string(run.points[i].label) + ',' +
                format_number(run.scores[i].lambda_max) + ',' + format_number(run.boundary_distances[i]) + '\n';
    }
    records::write_text(o.out_dir / "points.csv", points);

    std::string eig = "x1,x2,v1,v2\n";
    for (const std::size_t i : run.top) {
      const auto& p = *run.points[i].point;
      const auto& v = run.scores[i].top_eigenvector;
      eig += format_number(p[0]) + ',' + format_number(p[1]) + ',' + format_number(v[0]) + ',' +
             format_number(v[1]) + '\n';
    }
    records::write_text(o.out_dir / "top20_eigvec.csv", eig);

    models::Checkpoint ckpt{run.trained.model, std::nullopt, nlohmann::json::object()};
    ckpt.metadata = {{"labels", {"0", "1"}},
                     {"data", {{"source", "gaussian_mixture"}, {"seed", o.seed}, {"n_per_class", o.n_per_class}}},
                     {"train_config", trainer::to_json(run.config)},
                     {"best_epoch", run.trained.report.best_epoch},
                     {"best_valid_accuracy", run.trained.report.best_valid_accuracy}};
    models::save_checkpoint(o.out_dir / "model.ckpt", ckpt);
    records::write_text(o.out_dir / "train_report.json", trainer::to_json(run.trained.report).dump(2) + '\n');
    const nlohmann::json summary{{"valid_accuracy", run.trained.report.best_valid_accuracy},
                                 {"spearman_lambda_distance", run.spearman},
                                 {"points", run.points.size()},
                                 {"seed", o.seed}};
    records::write_text(o.out_dir / "summary.json", summary.dump(2) + '\n');

    out << "valid accuracy: " << format_number(run.trained.report.best_valid_accuracy) << '\n';
    out << "spearman(lambda_max, boundary_distance): " << format_number(run.spearman) << '\n';
    return 0;
  });
}

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_file(o.checkpoint, "checkpoint");
    const std::string bytes = read_bytes(o.checkpoint);
    const models::Checkpoint ckpt = models::decode_checkpoint(bytes);
    datakit::Classifier classifier = load_classifier(ckpt, o.data.embeddings);
    std::vector<datakit::Example> examples;
    if (o.data.data) examples = load_examples(o.data, resolve_labels(o.data.labels, ckpt));
    std::vector<fim::FimResult> precomputed;
    if (o.scored) {
      require_file(*o.scored, "scored file");
      precomputed = records::read_scored_jsonl(*o.scored);
    }
    service::Service svc(std::move(classifier), std::move(examples), models::hex64(models::fnv1a(bytes)),
                         std::move(precomputed));
    svc.attribution_steps = o.attribution_steps;
    out << "serving " << svc.dataset_size() << " examples on http://" << o.host << ':' << o.port << '\n';
    out.flush();
    service::run_server(svc, o.host, o.port);
    return 0;
  });
}

}  // namespace fisher_probe::cli

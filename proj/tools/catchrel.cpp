// catchrel: command-line front end. Every subcommand is one pipeline call;
// results go to stdout, failures to stderr as {"error", "message", "details"}.

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "catchrel/bali26.hpp"
#include "catchrel/libav_backend.hpp"
#include "catchrel/pipeline.hpp"
#include "catchrel/service.hpp"

using namespace catchrel;

namespace {

/// "mm:ss", "hh:mm:ss" or plain seconds.
double parse_clock(const std::string& s) {
  double total = 0;
  std::size_t pos = 0;
  try {
    while (true) {
      const auto colon = s.find(':', pos);
      const auto part = s.substr(pos, colon == std::string::npos ? std::string::npos : colon - pos);
      std::size_t used = 0;
      const double v = std::stod(part, &used);
      if (used != part.size() || v < 0) throw std::invalid_argument(part);
      total = total * 60 + v;
      if (colon == std::string::npos) break;
      pos = colon + 1;
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "cannot parse time '" + s + "' (use mm:ss or seconds)");
  }
  return total;
}

std::pair<double, double> parse_interval(const std::string& s) {
  const auto dash = s.find('-', 1);
  if (dash == std::string::npos) throw Error(ErrorCode::invalid_argument, "interval '" + s + "' must be start-end");
  return {parse_clock(s.substr(0, dash)), parse_clock(s.substr(dash + 1))};
}

std::pair<std::size_t, std::size_t> parse_bounds(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    return {std::stoul(s.substr(0, colon)), std::stoul(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_argument, "balance bounds '" + s + "' must be min:max");
  }
}

PredictionLog read_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::not_found, "prediction log " + path);
  return read_prediction_log(in);
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

void print_error(std::string_view code, const std::string& message, const std::vector<std::string>& details = {}) {
  std::cerr << Json{{"error", code}, {"message", message}, {"details", details}}.dump() << "\n";
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"catchrel: video-to-dataset curation, release and evaluation"};
  app.require_subcommand(1);
  std::string root = std::getenv("CATCHREL_WORKSPACE") ? std::getenv("CATCHREL_WORKSPACE") : ".";
  app.add_option("-w,--workspace", root, "Workspace directory (default $CATCHREL_WORKSPACE or .)");

  std::function<void()> action;
  auto on = [&](CLI::App* sub, std::function<void()> f) { sub->callback([&action, f] { action = f; }); };

  std::unique_ptr<Workspace> workspace;
  auto open_ws = [&]() -> Workspace& {
    if (!workspace) workspace.reset(new Workspace(Workspace::open(root)));
    return *workspace;
  };
  LibavBackend backend;

  // ingest
  std::string ingest_file, site_note;
  auto* ingest = app.add_subcommand("ingest", "Copy a .webm/.mp4 into the workspace and print its asset id");
  ingest->add_option("file", ingest_file)->required();
  ingest->add_option("--site-note", site_note, "Free-text site description (no coordinates)");
  on(ingest, [&] { std::cout << open_ws().ingest(backend, ingest_file, site_note).asset_id << "\n"; });

  // transcribe
  TranscribeRequest tr;
  std::string tr_start, tr_end;
  double tr_chunk = 0, tr_threshold = -1;
  std::string tr_language, tr_provider, tr_term, tr_credential, tr_script, tr_endpoint;
  auto* transcribe = app.add_subcommand("transcribe", "Chunk, recognize and store an asset transcript");
  transcribe->add_option("asset", tr.asset_id)->required();
  transcribe->add_option("--start", tr_start, "Window start, mm:ss");
  transcribe->add_option("--end", tr_end, "Window end, mm:ss");
  transcribe->add_option("--chunk-len", tr_chunk, "Chunk length in seconds (5-59)");
  transcribe->add_option("--threshold", tr_threshold, "Confidence threshold (0-1)");
  transcribe->add_option("--language", tr_language, "BCP-47 language tag");
  transcribe->add_option("--provider", tr_provider, "offline or remote");
  transcribe->add_option("--term", tr_term, "Search the filtered transcript for this term");
  transcribe->add_option("--credential", tr_credential, "Remote provider JSON key file");
  transcribe->add_option("--script", tr_script, "Offline provider script");
  transcribe->add_option("--endpoint", tr_endpoint, "Remote provider URL");
  on(transcribe, [&] {
    auto& ws = open_ws();
    if (!tr_start.empty() || !tr_end.empty()) {
      const double s = tr_start.empty() ? 0.0 : parse_clock(tr_start);
      const double e = tr_end.empty() ? ws.get_asset(tr.asset_id).duration_s : parse_clock(tr_end);
      tr.window = {s, e};
    }
    if (transcribe->count("--chunk-len")) tr.chunk_len_s = tr_chunk;
    if (transcribe->count("--threshold")) tr.threshold = tr_threshold;
    if (!tr_language.empty()) tr.language = tr_language;
    if (!tr_provider.empty()) tr.provider = tr_provider;
    if (transcribe->count("--term")) tr.search_term = tr_term;
    if (!tr_credential.empty()) tr.credential_path = tr_credential;
    if (!tr_script.empty()) tr.offline_script = tr_script;
    if (!tr_endpoint.empty()) tr.endpoint = tr_endpoint;
    print(run_transcribe(ws, backend, tr));
  });

  // search
  std::string se_asset, se_term;
  double se_threshold = -1;
  auto* search_cmd = app.add_subcommand("search", "Find a term in a stored transcript");
  search_cmd->add_option("asset", se_asset)->required();
  search_cmd->add_option("term", se_term)->required();
  search_cmd->add_option("--threshold", se_threshold, "Confidence threshold (0-1)");
  on(search_cmd, [&] {
    std::optional<double> t;
    if (search_cmd->count("--threshold")) {
      check_threshold(se_threshold);
      t = se_threshold;
    }
    print(search_asset(open_ws(), se_asset, se_term, t));
  });

  // dataset
  std::string ds_id;
  bool ds_bali26 = false;
  std::vector<std::string> ds_categories;
  auto* dataset = app.add_subcommand("dataset", "Create, list or show datasets");
  dataset->require_subcommand(1);
  auto* ds_create = dataset->add_subcommand("create", "Create a dataset");
  ds_create->add_option("id", ds_id)->required();
  ds_create->add_flag("--bali26", ds_bali26, "Register the 26 Bali-26 categories");
  ds_create->add_option("--category", ds_categories, "slug[:display name[:scientific name]]");
  on(ds_create, [&] {
    std::vector<Category> cats;
    if (ds_bali26) cats = bali26_categories();
    for (const auto& spec : ds_categories) {
      Category c;
      std::istringstream in(spec);
      std::getline(in, c.slug, ':');
      std::getline(in, c.display_name, ':');
      std::getline(in, c.scientific_name);
      if (c.display_name.empty()) c.display_name = c.slug;
      cats.push_back(c);
    }
    auto store = open_ws().create_dataset(ds_id, cats);
    std::cout << ds_id << " v" << store.head_version() << "\n";
  });
  auto* ds_list = dataset->add_subcommand("list", "List datasets");
  on(ds_list, [&] {
    for (const auto& id : open_ws().list_datasets()) std::cout << id << "\n";
  });
  std::int64_t ds_version = -1;
  auto* ds_show = dataset->add_subcommand("show", "Print a manifest (head by default)");
  ds_show->add_option("id", ds_id)->required();
  ds_show->add_option("--version", ds_version);
  on(ds_show, [&] {
    auto store = open_ws().dataset(ds_id);
    print(ds_version >= 0 ? store.load(ds_version) : store.head());
  });

  // label
  LabelRequest lr;
  std::vector<std::string> lr_intervals;
  std::string lr_term;
  double lr_threshold = -1;
  auto* label = app.add_subcommand("label", "Record label spans for later extraction");
  label->add_option("dataset", lr.dataset_id)->required();
  label->add_option("asset", lr.asset_id)->required();
  label->add_option("label", lr.label)->required();
  auto* lr_term_opt = label->add_option("--term", lr_term, "Spans around transcript hits for this term");
  auto* lr_whole_opt = label->add_flag("--whole", lr.whole_video, "One span over the whole asset");
  auto* lr_iv_opt = label->add_option("--interval", lr_intervals, "Expert span start-end (mm:ss-mm:ss)");
  lr_term_opt->excludes(lr_whole_opt)->excludes(lr_iv_opt);
  lr_whole_opt->excludes(lr_iv_opt);
  label->add_option("--pad-before", lr.pad_before_s, "Seconds before each hit");
  label->add_option("--pad-after", lr.pad_after_s, "Seconds after each hit");
  label->add_option("--threshold", lr_threshold, "Confidence threshold for term search");
  label->add_option("--note", lr.note);
  on(label, [&] {
    if (label->count("--term")) lr.term = lr_term;
    if (label->count("--threshold")) lr.threshold = lr_threshold;
    for (const auto& s : lr_intervals) lr.intervals.push_back(parse_interval(s));
    auto& ws = open_ws();
    const auto added = run_label(ws, lr);
    print({{"added", added}, {"spans_total", ws.load_spans(lr.dataset_id).size()}});
  });

  // extract
  ExtractRequest er;
  double er_fps = 0;
  std::vector<std::string> er_tags;
  auto* extract = app.add_subcommand("extract", "Decode frames for every recorded span");
  extract->add_option("dataset", er.dataset_id)->required();
  extract->add_option("--fps", er_fps, "Sampling rate cap");
  extract->add_option("--tag", er_tags, "Context tag attached to every new frame");
  on(extract, [&] {
    if (extract->count("--fps")) er.fps_cap = er_fps;
    er.context_tags = {er_tags.begin(), er_tags.end()};
    print(run_extract(open_ws(), backend, er));
  });

  // curate
  CurateRequest cr;
  double cr_blur = 0;
  int cr_dedup = 0;
  std::string cr_balance;
  auto* curate = app.add_subcommand("curate", "Blur filter, near-duplicate removal and balancing");
  curate->add_option("dataset", cr.dataset_id)->required();
  curate->add_option("--blur", cr_blur, "Laplacian-variance threshold");
  curate->add_option("--dedup", cr_dedup, "Maximum Hamming distance counted as duplicate");
  curate->add_option("--balance", cr_balance, "min:max frames per category");
  curate->add_option("--seed", cr.seed);
  on(curate, [&] {
    if (curate->count("--blur")) cr.blur_threshold = cr_blur;
    if (curate->count("--dedup")) cr.hamming_max = cr_dedup;
    if (!cr_balance.empty()) std::tie(cr.balance_min, cr.balance_max) = parse_bounds(cr_balance);
    print(run_curate(open_ws(), cr));
  });

  // split
  SplitRequest sr;
  bool sr_no_norm = false;
  auto* split_cmd = app.add_subcommand("split", "Deterministic per-category train/eval split");
  split_cmd->add_option("dataset", sr.dataset_id)->required();
  split_cmd->add_option("--fraction", sr.train_fraction, "Train fraction");
  split_cmd->add_option("--seed", sr.seed);
  split_cmd->add_flag("--no-normalize", sr_no_norm, "Skip channel statistics");
  on(split_cmd, [&] {
    sr.normalize = !sr_no_norm;
    print(run_split(open_ws(), sr));
  });

  // exclude / include
  std::string mx_dataset, mx_note;
  std::vector<std::string> mx_ids;
  auto* exclude = app.add_subcommand("exclude", "Manually exclude frames");
  exclude->add_option("dataset", mx_dataset)->required();
  exclude->add_option("frame_ids", mx_ids)->required();
  exclude->add_option("--note", mx_note);
  on(exclude, [&] { print(curation_report(run_manual(open_ws(), mx_dataset, mx_ids, true, mx_note))); });
  auto* include = app.add_subcommand("include", "Undo manual exclusions");
  include->add_option("dataset", mx_dataset)->required();
  include->add_option("frame_ids", mx_ids)->required();
  on(include, [&] { print(curation_report(run_manual(open_ws(), mx_dataset, mx_ids, false, ""))); });

  // export
  std::string ex_dataset;
  bool ex_include_excluded = false;
  auto* export_cmd = app.add_subcommand("export", "Write a release snapshot");
  export_cmd->add_option("dataset", ex_dataset)->required();
  export_cmd->add_flag("--include-excluded", ex_include_excluded, "Also write excluded frames under quarantine/");
  on(export_cmd, [&] { print(run_export(open_ws(), ex_dataset, ex_include_excluded)); });

  // merge
  MergeRequest mr;
  std::vector<std::string> mr_assets;
  double mr_fps = 0;
  std::vector<std::string> mr_tags;
  auto* merge = app.add_subcommand("merge", "Add a new collection to one category and rebalance");
  merge->add_option("dataset", mr.dataset_id)->required();
  merge->add_option("--label", mr.target_label)->required();
  merge->add_option("--asset", mr_assets, "asset_id, or asset_id@start-end[,start-end...]")->required();
  merge->add_option("--fps", mr_fps, "Sampling rate cap");
  merge->add_option("--tag", mr_tags, "Context tag for new frames");
  on(merge, [&] {
    if (merge->count("--fps")) mr.fps_cap = mr_fps;
    mr.context_tags = {mr_tags.begin(), mr_tags.end()};
    for (const auto& spec : mr_assets) {
      MergeInput in;
      const auto at = spec.find('@');
      in.asset_id = spec.substr(0, at);
      if (at != std::string::npos) {
        std::istringstream parts(spec.substr(at + 1));
        for (std::string iv; std::getline(parts, iv, ',');) in.intervals.push_back(parse_interval(iv));
      }
      mr.inputs.push_back(std::move(in));
    }
    print(run_merge(open_ws(), backend, mr));
  });

  // evaluate / vote
  EvaluateRequest ev;
  std::vector<std::string> ev_logs;
  std::vector<int> ev_ks;
  std::string ev_tag, ev_split = "eval", vote_out;
  bool ev_csv = false, ev_json = false;
  auto add_eval_options = [&](CLI::App* sub, bool many) {
    sub->add_option("dataset", ev.dataset_id)->required();
    auto* o = sub->add_option("--log", ev_logs, many ? "Prediction logs to vote over" : "Prediction log (JSONL)")
                  ->required();
    if (!many) o->expected(1);
    sub->add_option("--k", ev_ks, "Top-k cutoffs (repeatable)");
    sub->add_option("--tag", ev_tag, "Score only eval frames carrying this context tag");
    sub->add_option("--split", ev_split, "eval or train")->check(CLI::IsMember({"eval", "train"}));
    sub->add_flag("--csv", ev_csv, "Print slug,top1,top3 rows");
    sub->add_flag("--json", ev_json, "Print the stored report document");
  };
  auto finish_eval = [&](const Json& doc) {
    const auto report = doc.at("report").get<EvaluationReport>();
    if (ev_json) print(doc);
    else if (ev_csv) std::cout << report_csv(report);
    else std::cout << report_table(report) << "report " << doc.at("report_id").get<std::string>() << "\n";
  };
  auto prepare_eval = [&] {
    if (!ev_ks.empty()) ev.ks = ev_ks;
    if (!ev_tag.empty()) ev.subset_tag = ev_tag;
    ev.split = ev_split == "train" ? SplitAssignment::train : SplitAssignment::eval;
  };
  auto* evaluate = app.add_subcommand("evaluate", "Score a prediction log against a dataset split");
  add_eval_options(evaluate, false);
  on(evaluate, [&] {
    prepare_eval();
    finish_eval(run_evaluate(open_ws(), ev, read_log_file(ev_logs.front())));
  });
  auto* vote = app.add_subcommand("vote", "Majority vote across prediction logs, then score it");
  add_eval_options(vote, true);
  vote->add_option("--out", vote_out, "Also write the voted log here");
  on(vote, [&] {
    prepare_eval();
    std::vector<PredictionLog> logs;
    for (const auto& p : ev_logs) logs.push_back(read_log_file(p));
    if (!vote_out.empty()) {
      std::ofstream out(vote_out);
      write_prediction_log(out, vote_records(logs));
    }
    finish_eval(run_vote(open_ws(), ev, logs));
  });

  // baseline
  std::string bl_dataset, bl_out;
  auto* baseline = app.add_subcommand("baseline", "Nearest-centroid classifier over the split; writes a prediction log");
  baseline->add_option("dataset", bl_dataset)->required();
  baseline->add_option("--out", bl_out, "Output file (stdout if omitted)");
  on(baseline, [&] {
    const auto log = run_baseline(open_ws(), bl_dataset);
    if (bl_out.empty()) {
      write_prediction_log(std::cout, log);
    } else {
      std::ofstream out(bl_out);
      write_prediction_log(out, log);
      if (!out) throw Error(ErrorCode::io_error, "cannot write " + bl_out);
    }
  });

  // report
  std::string rp_dataset, rp_id;
  bool rp_csv = false;
  auto* report = app.add_subcommand("report", "Print a curation report, or a stored evaluation report by id");
  report->add_option("dataset", rp_dataset, "Dataset whose curation state to print");
  report->add_option("--id", rp_id, "Stored evaluation report id");
  report->add_flag("--csv", rp_csv, "Evaluation report as slug,top1,top3 rows");
  on(report, [&] {
    auto& ws = open_ws();
    if (!rp_id.empty()) {
      const auto doc = ws.load_report(rp_id);
      if (rp_csv) std::cout << report_csv(doc.at("report").get<EvaluationReport>());
      else print(doc);
    } else if (!rp_dataset.empty()) {
      print(curation_report(ws.dataset(rp_dataset).head()));
    } else {
      throw Error(ErrorCode::invalid_argument, "give a dataset or --id");
    }
  });

  // serve
  std::string sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--host", sv_host);
  serve->add_option("--port", sv_port);
  on(serve, [&] {
    Service service(open_ws(), backend);
    if (!service.bind(sv_host, sv_port)) {
      throw Error(ErrorCode::io_error, "cannot bind " + sv_host + ":" + std::to_string(sv_port));
    }
    g_service = &service;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on " << sv_host << ":" << sv_port << "\n";
    service.serve();
    g_service = nullptr;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    print_error("usage", e.what());
    return 2;
  }
  try {
    if (action) action();
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what(), e.details());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}

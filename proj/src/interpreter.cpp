#include "ntg/interpreter.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "ntg/nn.hpp"
#include "ntg/optim.hpp"

namespace ntg {

namespace {

constexpr const char* kEnc = "enc";
constexpr const char* kDec = "dec";

// decoder-input embedding rows: one per action, then end symbol, then the
// begin-of-sequence row fed at the first step
int bos_row(const InterpreterConfig& cfg) { return cfg.action_count + 1; }

std::vector<int> subsample_indices(std::size_t frames, int cap) {
  std::vector<int> idx;
  if (static_cast<int>(frames) <= cap) {
    for (std::size_t i = 0; i < frames; ++i) idx.push_back(static_cast<int>(i));
    return idx;
  }
  for (int i = 0; i < cap; ++i) {
    double pos = static_cast<double>(i) * static_cast<double>(frames - 1) / (cap - 1);
    idx.push_back(static_cast<int>(std::lround(pos)));
  }
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

struct Decoder {
  // per-demo forward state shared by training and greedy decoding
  GruCell enc, dec;
  Linear wa, wc, head;

  static Decoder attach(const Interpreter& model) {
    return Decoder{GruCell::attach(model.params, kEnc), GruCell::attach(model.params, kDec),
                   Linear::attach(model.params, "att"), Linear::attach(model.params, "comb"),
                   Linear::attach(model.params, "head")};
  }
};

struct EncodedDemo {
  std::vector<Var> enc_states;
  std::vector<Var> att_proj;  // W_a * enc_state, cached across decode steps
  Var final_state;
};

EncodedDemo encode_frames(Tape& tape, VarCache& cache, Interpreter& model, const Decoder& d,
                          const std::vector<std::vector<double>>& observations) {
  const auto& cfg = model.cfg;
  EncodedDemo out;
  Var h = tape.input(std::vector<double>(cfg.hidden, 0.0));
  for (int i : subsample_indices(observations.size(), cfg.max_frames)) {
    if (static_cast<int>(observations[i].size()) != cfg.obs_width)
      throw InputError("interpreter: observation width mismatch");
    h = d.enc.apply(tape, cache, model.params, tape.input(observations[i]), h);
    out.enc_states.push_back(h);
    out.att_proj.push_back(d.wa.apply(tape, cache, model.params, h));
  }
  out.final_state = h;
  return out;
}

// one decode step: logits over action_count+1 given the previous token row
Var decode_step(Tape& tape, VarCache& cache, Interpreter& model, const Decoder& d,
                const EncodedDemo& enc, Var& h_dec, int prev_row) {
  const auto& cfg = model.cfg;
  Var emb = embedding_row(tape, cache, model.params, "emb", cfg.embed, prev_row);
  h_dec = d.dec.apply(tape, cache, model.params, emb, h_dec);
  std::vector<Var> scores;
  scores.reserve(enc.enc_states.size());
  for (const Var& p : enc.att_proj) scores.push_back(tape.dot(h_dec, p));
  Var alpha = tape.softmax(tape.stack(scores));
  Var ctx = tape.mul_scalar(tape.pick(alpha, 0), enc.enc_states[0]);
  for (std::size_t t = 1; t < enc.enc_states.size(); ++t)
    ctx = tape.add(ctx, tape.mul_scalar(tape.pick(alpha, t), enc.enc_states[t]));
  Var comb = tape.tanh_(d.wc.apply(tape, cache, model.params, tape.concat({ctx, h_dec})));
  return d.head.apply(tape, cache, model.params, comb);
}

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

std::string InterpreterConfig::to_json() const {
  nlohmann::ordered_json j{{"obs_width", obs_width}, {"action_count", action_count},
                           {"hidden", hidden},       {"embed", embed},
                           {"max_frames", max_frames}, {"epochs", epochs},
                           {"lr", lr},               {"grad_clip", grad_clip},
                           {"seed", seed}};
  return j.dump();
}

InterpreterConfig InterpreterConfig::from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  InterpreterConfig c;
  c.obs_width = j.at("obs_width").get<int>();
  c.action_count = j.at("action_count").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.embed = j.at("embed").get<int>();
  c.max_frames = j.at("max_frames").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.lr = j.at("lr").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

Interpreter make_interpreter(const InterpreterConfig& cfg) {
  if (cfg.obs_width <= 0 || cfg.action_count <= 0)
    throw ConfigError("interpreter: obs_width and action_count must be set");
  Interpreter model{cfg, ModuleParams(cfg.seed)};
  Rng rng(derive_seed(cfg.seed, "interpreter-init"));
  GruCell::create(model.params, kEnc, cfg.obs_width, cfg.hidden, rng);
  GruCell::create(model.params, kDec, cfg.embed, cfg.hidden, rng);
  Linear::create(model.params, "att", cfg.hidden, cfg.hidden, rng);
  Linear::create(model.params, "comb", 2 * cfg.hidden, cfg.hidden, rng);
  Linear::create(model.params, "head", cfg.hidden, cfg.action_count + 1, rng);
  model.params.add_matrix("emb", cfg.action_count + 2, cfg.embed, rng);
  model.params.meta()["component"] = "interpreter";
  model.params.meta()["config"] = cfg.to_json();
  return model;
}

double interpreter_loss(Interpreter& model, const Demonstration& demo) {
  if (demo.actions.empty()) throw InputError("interpreter: demo has no action labels");
  Decoder d = Decoder::attach(model);
  Tape tape;
  VarCache cache;
  EncodedDemo enc = encode_frames(tape, cache, model, d, demo.observations);
  Var h_dec = enc.final_state;
  std::vector<Var> losses;
  int prev_row = bos_row(model.cfg);
  for (std::size_t k = 0; k <= demo.actions.size(); ++k) {
    int target = k < demo.actions.size() ? demo.actions[k] : model.end_symbol();
    Var logits = decode_step(tape, cache, model, d, enc, h_dec, prev_row);
    losses.push_back(tape.softmax_cross_entropy(logits, target));
    prev_row = target;  // teacher forcing
  }
  Var loss = tape.mean(losses);
  tape.backward(loss);
  return tape.scalar(loss);
}

Interpreter train_interpreter(const std::vector<Demonstration>& demos, InterpreterConfig cfg,
                              std::vector<TrainLogRow>* log) {
  if (demos.empty()) throw InputError("interpreter: no training demos");
  for (const auto& d : demos)
    if (d.actions.empty()) throw InputError("interpreter: training demo without action labels");

  Interpreter model = make_interpreter(cfg);
  Optimizer opt({OptimizerKind::Adam, cfg.lr, 0.9, 0.999, 1e-8, cfg.grad_clip});
  Rng shuffler(derive_seed(cfg.seed, "interpreter-shuffle"));
  std::vector<int> order(demos.size());
  for (std::size_t i = 0; i < demos.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffler.shuffle(order);
    double total = 0.0;
    for (int i : order) {
      total += interpreter_loss(model, demos[i]);
      opt.step(model.params);
    }
    if (log) log->push_back({epoch, total / static_cast<double>(demos.size()), 0.0});
  }
  return model;
}

InterpretResult interpret(const Interpreter& model_in, const Demonstration& demo) {
  if (demo.observations.empty()) throw InputError("interpreter: empty demo");
  Interpreter& model = const_cast<Interpreter&>(model_in);  // tape leaves want mutable tensors
  Decoder d = Decoder::attach(model);
  Tape tape;
  VarCache cache;
  EncodedDemo enc = encode_frames(tape, cache, model, d, demo.observations);
  Var h_dec = enc.final_state;
  InterpretResult result;
  int cap = 2 * static_cast<int>(demo.observations.size());
  int prev_row = bos_row(model.cfg);
  for (int k = 0; k < cap; ++k) {
    Var logits = decode_step(tape, cache, model, d, enc, h_dec, prev_row);
    int choice = argmax_lowest(tape.value(logits));
    if (choice == model.end_symbol()) return result;
    result.actions.push_back(choice);
    prev_row = choice;
  }
  result.truncated = true;
  return result;
}

double sequence_accuracy(const Interpreter& model, const std::vector<Demonstration>& demos) {
  if (demos.empty()) return 0.0;
  int exact = 0;
  for (const auto& demo : demos)
    if (interpret(model, demo).actions == demo.actions) ++exact;
  return static_cast<double>(exact) / static_cast<double>(demos.size());
}

void Interpreter::save(const std::string& path) const { save_checkpoint(params, path); }

Interpreter Interpreter::load(const std::string& path) {
  ModuleParams params = load_checkpoint(path);
  auto it = params.meta().find("config");
  if (it == params.meta().end()) throw IoError("interpreter checkpoint missing config meta");
  Interpreter model{InterpreterConfig::from_json(it->second), std::move(params)};
  return model;
}

}  // namespace ntg

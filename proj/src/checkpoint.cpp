#include "slubench/checkpoint.hpp"

#include <memory>
#include <sstream>

#include "slubench/errors.hpp"

namespace slubench::checkpoint {

using models::ModelConfig;

std::string serialize(const models::Model& model) {
  const ModelConfig& c = model.config();
  std::ostringstream out;
  out << kMagic << "\n[config]\n";
  out << "family = " << models::to_string(c.family) << "\n";
  out << "d_model = " << c.d_model << "\n";
  out << "n_heads = " << c.n_heads << "\n";
  out << "n_layers = " << c.n_layers << "\n";
  out << "hidden = " << c.hidden << "\n";
  out << "n_intents = " << c.n_intents << "\n";
  out << "n_slot_tags = " << c.n_slot_tags << "\n";
  out << "multitask_weight = " << format_double(c.multitask_weight) << "\n";
  out << "max_len = " << c.max_len << "\n";
  out << "acoustic_dim = " << c.acoustic_dim << "\n";
  out << "seed = " << c.seed << "\n";
  out << "[labels]\n";
  for (const auto& i : model.labels().intents()) out << "intent " << i << "\n";
  for (const auto& t : model.labels().slot_tags()) out << "slot " << t << "\n";
  out << "[vocab]\n";
  for (const auto& t : model.vocab().tokens()) out << t << "\n";
  out << "[params]\n";
  for (const auto& [name, p] : model.params()) {
    out << "P " << name << " " << p.value.rows << " " << p.value.cols << "\n";
    for (std::size_t i = 0; i < p.value.size(); ++i) out << (i ? " " : "") << format_double(p.value.data[i]);
    out << "\n";
  }
  return out.str();
}

namespace {

std::size_t need_size(const std::string& v, std::size_t line) {
  std::size_t out = 0;
  if (!parse_size(v, out)) throw ParseError("expected a non-negative integer, got '" + v + "'", line);
  return out;
}

}  // namespace

models::Model parse(const std::string& text) {
  std::vector<std::string> lines = split_exact(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty() || lines[0] != kMagic) throw ParseError("missing checkpoint header", 1);

  ModelConfig cfg;
  models::LabelSpace labels;
  std::vector<std::string> vocab_tokens;
  std::string section;
  std::size_t i = 1;
  for (; i < lines.size(); ++i) {
    const std::string& l = lines[i];
    const std::size_t ln = i + 1;
    if (l == "[config]" || l == "[labels]" || l == "[vocab]") {
      section = l;
      continue;
    }
    if (l == "[params]") break;
    if (section == "[config]") {
      auto eq = l.find(" = ");
      if (eq == std::string::npos) throw ParseError("expected 'key = value'", ln);
      std::string k = l.substr(0, eq), v = l.substr(eq + 3);
      if (k == "family") {
        try {
          cfg.family = models::parse_family(v);
        } catch (const ContractError& e) {
          throw ParseError(e.what(), ln);
        }
      } else if (k == "d_model") cfg.d_model = need_size(v, ln);
      else if (k == "n_heads") cfg.n_heads = need_size(v, ln);
      else if (k == "n_layers") cfg.n_layers = need_size(v, ln);
      else if (k == "hidden") cfg.hidden = need_size(v, ln);
      else if (k == "n_intents") cfg.n_intents = need_size(v, ln);
      else if (k == "n_slot_tags") cfg.n_slot_tags = need_size(v, ln);
      else if (k == "max_len") cfg.max_len = need_size(v, ln);
      else if (k == "acoustic_dim") cfg.acoustic_dim = need_size(v, ln);
      else if (k == "seed") cfg.seed = need_size(v, ln);
      else if (k == "multitask_weight") {
        if (!parse_double(v, cfg.multitask_weight)) throw ParseError("bad multitask_weight '" + v + "'", ln);
      } else {
        throw ParseError("unknown config key '" + k + "'", ln);
      }
    } else if (section == "[labels]") {
      if (l.rfind("intent ", 0) == 0) labels.add_intent(l.substr(7));
      else if (l.rfind("slot ", 0) == 0) {
        if (l.substr(5) != "O") labels.add_slot_tag(l.substr(5));
      } else {
        throw ParseError("expected 'intent <label>' or 'slot <tag>'", ln);
      }
    } else if (section == "[vocab]") {
      if (l.empty()) throw ParseError("empty vocabulary entry", ln);
      vocab_tokens.push_back(l);
    } else {
      throw ParseError("content outside a section", ln);
    }
  }
  if (i >= lines.size()) throw ParseError("missing [params] section", lines.size());

  models::Vocabulary vocab;
  if (vocab_tokens.size() < 3 || vocab_tokens[0] != vocab.token(0) || vocab_tokens[1] != vocab.token(1) ||
      vocab_tokens[2] != vocab.token(2))
    throw ParseError("vocabulary must start with the special tokens", i);
  for (std::size_t k = 3; k < vocab_tokens.size(); ++k) vocab.add(vocab_tokens[k]);

  std::unique_ptr<models::Model> model;
  try {
    model = std::make_unique<models::Model>(cfg, vocab, labels);
  } catch (const ContractError& e) {
    throw ParseError(std::string("invalid configuration: ") + e.what(), 1);
  }
  std::size_t loaded = 0;
  for (++i; i < lines.size(); ++i) {
    std::vector<std::string> head = split_exact(lines[i], ' ');
    if (head.size() != 4 || head[0] != "P") throw ParseError("expected 'P <name> <rows> <cols>'", i + 1);
    std::size_t rows = need_size(head[2], i + 1), cols = need_size(head[3], i + 1);
    if (!model->params().contains(head[1])) throw ParseError("unexpected parameter '" + head[1] + "'", i + 1);
    nn::Matrix& v = model->params().at(head[1]).value;
    if (v.rows != rows || v.cols != cols)
      throw ParseError("parameter '" + head[1] + "' has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                           ", expected " + shape_string(v),
                       i + 1);
    if (++i >= lines.size()) throw ParseError("missing values for '" + head[1] + "'", i);
    std::vector<std::string> vals = lines[i].empty() ? std::vector<std::string>{} : split_exact(lines[i], ' ');
    if (vals.size() != v.size())
      throw ParseError("parameter '" + head[1] + "' needs " + std::to_string(v.size()) + " values", i + 1);
    for (std::size_t k = 0; k < vals.size(); ++k)
      if (!parse_double(vals[k], v.data[k])) throw ParseError("bad value '" + vals[k] + "'", i + 1);
    ++loaded;
  }
  if (loaded != model->params().size())
    throw ParseError("checkpoint holds " + std::to_string(loaded) + " of " + std::to_string(model->params().size()) +
                         " parameters",
                     lines.size());
  return std::move(*model);
}

void save(const std::string& path, const models::Model& model) { write_file(path, serialize(model)); }

models::Model load(const std::string& path) { return parse(read_file(path)); }

}  // namespace slubench::checkpoint

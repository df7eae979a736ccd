#include "ovtok/decoder.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace ovtok {

namespace {

const char* kObjectListSentence = "here is a list of objects and instances in the video :";

std::vector<int> text_ids(const std::string& text, const Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& word : Vocab::tokenize(text)) ids.push_back(vocab.id(word));
  return ids;
}

Slot text_slot(int token_id, bool answer = false) {
  Slot s;
  s.type = Slot::Type::text;
  s.token_id = token_id;
  s.answer_region = answer;
  return s;
}

}  // namespace

const std::string& object_list_sentence() {
  static const std::string sentence = kObjectListSentence;
  return sentence;
}

Vocab Vocab::build(const std::vector<std::string>& corpus) {
  std::set<std::string> unique;
  for (const auto& text : corpus)
    for (const auto& word : tokenize(text)) unique.insert(word);
  return from_words({unique.begin(), unique.end()});
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  Vocab v;
  v.words_ = std::move(words);
  std::sort(v.words_.begin(), v.words_.end());
  v.words_.erase(std::unique(v.words_.begin(), v.words_.end()), v.words_.end());
  for (std::size_t i = 0; i < v.words_.size(); ++i)
    v.ids_[v.words_[i]] = kReserved + static_cast<int>(i);
  return v;
}

std::vector<std::string> Vocab::tokenize(const std::string& text) {
  std::string spaced;
  spaced.reserve(text.size() * 2);
  for (char c : text) {
    if (c == '?' || c == '!' || c == '.' || c == ',' || c == ':' || c == ';') {
      spaced.push_back(' ');
      spaced.push_back(c);
      spaced.push_back(' ');
    } else {
      spaced.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  std::istringstream is(spaced);
  std::vector<std::string> out;
  std::string word;
  while (is >> word) out.push_back(word);
  return out;
}

int Vocab::id(const std::string& word) const {
  const auto it = ids_.find(word);
  if (it == ids_.end()) throw std::out_of_range("Vocab: unknown word: " + word);
  return it->second;
}

bool Vocab::contains(const std::string& word) const { return ids_.count(word) > 0; }

std::string Vocab::word(int id) const {
  switch (id) {
    case kPad: return "<pad>";
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    case kSep: return "<sep>";
    default: break;
  }
  const int idx = id - kReserved;
  if (idx < 0 || idx >= static_cast<int>(words_.size()))
    throw std::out_of_range("Vocab: id out of range");
  return words_[static_cast<std::size_t>(idx)];
}

std::vector<int> TokenSequence::object_positions() const {
  std::vector<int> out;
  for (int i = 0; i < length(); ++i)
    if (slots[static_cast<std::size_t>(i)].type == Slot::Type::object) out.push_back(i);
  return out;
}

std::string TokenSequence::render(const Vocab& vocab) const {
  std::ostringstream os;
  bool first = true;
  for (const auto& slot : slots) {
    if (!first) os << " ";
    first = false;
    switch (slot.type) {
      case Slot::Type::context: os << "<v>"; break;
      case Slot::Type::object:
        if (slot.referring_placeholder)
          os << "<o>";
        else
          os << "<o" << slot.index + 1 << ">";
        break;
      case Slot::Type::text: os << vocab.word(slot.token_id); break;
    }
  }
  return os.str();
}

TokenSequence assemble_prompt(int context_count, const std::vector<int>& object_ids,
                              const std::string& instruction, PromptMode mode,
                              int referred_object_id, const Vocab& vocab, int max_len) {
  TokenSequence seq;
  seq.context_count = context_count;
  for (int i = 0; i < context_count; ++i) {
    Slot s;
    s.type = Slot::Type::context;
    s.index = i;
    seq.slots.push_back(s);
  }

  if (mode == PromptMode::general) {
    if (!object_ids.empty()) {
      for (int id : text_ids(kObjectListSentence, vocab)) seq.slots.push_back(text_slot(id));
      for (std::size_t i = 0; i < object_ids.size(); ++i) {
        if (i) seq.slots.push_back(text_slot(vocab.id(",")));
        Slot s;
        s.type = Slot::Type::object;
        s.index = static_cast<int>(i);
        s.object_id = object_ids[i];
        seq.slots.push_back(s);
        ++seq.object_count;
      }
    }
    for (int id : text_ids(instruction, vocab)) seq.slots.push_back(text_slot(id));
  } else {
    int referred_index = -1;
    for (std::size_t i = 0; i < object_ids.size(); ++i)
      if (object_ids[i] == referred_object_id) referred_index = static_cast<int>(i);
    if (referred_index < 0) throw MissingObjectError();
    bool placed = false;
    for (const auto& word : Vocab::tokenize(instruction)) {
      if (word == "<o>") {
        Slot s;
        s.type = Slot::Type::object;
        s.index = referred_index;
        s.object_id = referred_object_id;
        s.referring_placeholder = true;
        seq.slots.push_back(s);
        ++seq.object_count;
        placed = true;
      } else {
        seq.slots.push_back(text_slot(vocab.id(word)));
      }
    }
    if (!placed) throw std::invalid_argument("referring instruction lacks an <o> placeholder");
  }

  seq.sep_position = seq.length();
  seq.slots.push_back(text_slot(Vocab::kSep));
  if (seq.length() > max_len) throw std::invalid_argument("assemble_prompt: sequence over max length");
  return seq;
}

void append_answer(TokenSequence& seq, const std::string& answer, const Vocab& vocab) {
  for (int id : text_ids(answer, vocab)) seq.slots.push_back(text_slot(id, true));
  seq.slots.push_back(text_slot(Vocab::kEos, true));
}

DecoderParams DecoderParams::init(int vocab_size, const DecoderConfig& cfg, Rng& rng) {
  DecoderParams p;
  p.cfg = cfg;
  p.tok_embedding = init_param({vocab_size, cfg.dim}, cfg.dim, rng);
  // Position table starts near zero so early attention reflects content.
  p.pos_embedding = zeros_param({cfg.max_len, cfg.dim});
  for (double& v : p.pos_embedding->data) v = rng.uniform(-0.02, 0.02);
  for (int l = 0; l < cfg.layers; ++l)
    p.blocks.push_back(TransformerBlock::init(cfg.dim, cfg.heads, cfg.ff_hidden, rng));
  p.final_gain = ones_param({1, cfg.dim});
  p.final_bias = zeros_param({1, cfg.dim});
  p.head = Linear::init(cfg.dim, vocab_size, rng);
  return p;
}

void DecoderParams::collect(const std::string& prefix, NamedParams& out) const {
  out.emplace_back(prefix + ".tok_embedding", tok_embedding);
  out.emplace_back(prefix + ".pos_embedding", pos_embedding);
  for (std::size_t l = 0; l < blocks.size(); ++l)
    blocks[l].collect(prefix + ".block" + std::to_string(l), out);
  out.emplace_back(prefix + ".final.gain", final_gain);
  out.emplace_back(prefix + ".final.bias", final_bias);
  head.collect(prefix + ".head", out);
}

ForwardResult decoder_forward(Graph& g, const TokenSequence& seq, const DecoderParams& dec,
                              TensorPtr context_tokens,
                              const std::vector<TensorPtr>& object_vectors) {
  const int L = seq.length();
  if (L < 1) throw std::invalid_argument("decoder_forward: empty sequence");
  if (L > dec.cfg.max_len) throw std::invalid_argument("decoder_forward: sequence over max length");

  // Assemble the input rows, batching consecutive text slots into one gather.
  std::vector<TensorPtr> pieces;
  std::vector<int> run;
  auto flush_run = [&]() {
    if (!run.empty()) {
      pieces.push_back(g.embedding_rows(dec.tok_embedding, run));
      run.clear();
    }
  };
  for (const auto& slot : seq.slots) {
    switch (slot.type) {
      case Slot::Type::text:
        run.push_back(slot.token_id);
        break;
      case Slot::Type::context: {
        flush_run();
        if (!context_tokens || slot.index >= context_tokens->rows())
          throw std::invalid_argument("decoder_forward: context slot without context tokens");
        pieces.push_back(g.slice_rows(context_tokens, slot.index, slot.index + 1));
        break;
      }
      case Slot::Type::object: {
        flush_run();
        if (slot.index < 0 || slot.index >= static_cast<int>(object_vectors.size()))
          throw std::invalid_argument("decoder_forward: object slot without a vector");
        pieces.push_back(object_vectors[static_cast<std::size_t>(slot.index)]);
        break;
      }
    }
  }
  flush_run();

  // Consecutive context rows come from one matrix; collapsing them into a
  // single slice keeps the tape small.
  TensorPtr x = g.concat_rows(pieces);
  x = g.add(x, g.slice_rows(dec.pos_embedding, 0, L));

  ForwardResult result;
  for (const auto& block : dec.blocks) {
    auto out = block.forward(g, x, /*causal=*/true);
    x = out.x;
    result.attention.push_back(std::move(out.attn));
  }
  x = g.layer_norm(x, dec.final_gain, dec.final_bias);
  result.logits = dec.head.forward(g, x);
  return result;
}

TensorPtr sequence_loss(Graph& g, const ForwardResult& fwd, const TokenSequence& seq) {
  const int L = seq.length();
  std::vector<int> targets(static_cast<std::size_t>(L), 0);
  std::vector<bool> mask(static_cast<std::size_t>(L), false);
  for (int i = 0; i + 1 < L; ++i) {
    const Slot& next = seq.slots[static_cast<std::size_t>(i + 1)];
    if (next.type == Slot::Type::text && next.answer_region) {
      targets[static_cast<std::size_t>(i)] = next.token_id;
      mask[static_cast<std::size_t>(i)] = true;
    }
  }
  return g.cross_entropy(fwd.logits, targets, mask);
}

std::string greedy_generate(const TokenSequence& prompt, const DecoderParams& dec,
                            const Vocab& vocab, TensorPtr context_tokens,
                            const std::vector<TensorPtr>& object_vectors, int max_new) {
  TokenSequence seq = prompt;
  std::vector<int> generated;
  for (int step = 0; step < max_new; ++step) {
    Graph g;
    auto fwd = decoder_forward(g, seq, dec, context_tokens, object_vectors);
    const int L = seq.length();
    const int V = fwd.logits->cols();
    const double* row = &fwd.logits->data[static_cast<std::size_t>(L - 1) * V];
    int best = 0;  // argmax, first index wins ties
    for (int v = 1; v < V; ++v)
      if (row[v] > row[best]) best = v;
    if (best == Vocab::kEos) break;
    generated.push_back(best);
    Slot s;
    s.type = Slot::Type::text;
    s.token_id = best;
    s.answer_region = true;
    seq.slots.push_back(s);
    if (seq.length() >= dec.cfg.max_len) break;
  }
  std::ostringstream os;
  bool first = true;
  for (int id : generated) {
    if (!first) os << " ";
    first = false;
    os << vocab.word(id);
  }
  return os.str();
}

std::vector<double> attention_report(const TokenSequence& seq, const DecoderParams& dec,
                                     TensorPtr context_tokens,
                                     const std::vector<TensorPtr>& object_vectors) {
  const auto object_pos = seq.object_positions();
  if (object_pos.empty()) throw std::invalid_argument("attention_report: no object slots");

  Graph g;
  auto fwd = decoder_forward(g, seq, dec, context_tokens, object_vectors);
  const int L = seq.length();

  // Query positions are those predicting answer-region tokens; this is the
  // same position set the loss is computed on.
  std::vector<int> queries;
  for (int i = 0; i + 1 < L; ++i)
    if (seq.slots[static_cast<std::size_t>(i + 1)].answer_region) queries.push_back(i);
  if (queries.empty()) throw std::invalid_argument("attention_report: empty answer region");

  const Tensor& last = fwd.attention.back();
  const int heads = last.dims[0];
  std::vector<double> weights(object_pos.size(), 0.0);
  for (int h = 0; h < heads; ++h)
    for (int q : queries)
      for (std::size_t j = 0; j < object_pos.size(); ++j)
        weights[j] += last.data[(static_cast<std::size_t>(h) * L + q) * L + object_pos[j]];

  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) {
    const double uniform = 1.0 / static_cast<double>(weights.size());
    for (double& w : weights) w = uniform;
    return weights;
  }
  for (double& w : weights) w /= total;
  return weights;
}

}  // namespace ovtok

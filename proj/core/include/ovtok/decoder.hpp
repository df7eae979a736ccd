#pragma once

#include <map>
#include <string>
#include <vector>

#include "ovtok/nn.hpp"

namespace ovtok {

/// Word-level vocabulary built deterministically from the corpus (sorted
/// unique words after reserved ids).
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;  // prompt/answer separator
  static constexpr int kReserved = 4;

  static Vocab build(const std::vector<std::string>& corpus);
  static Vocab from_words(std::vector<std::string> words);

  /// Lowercases and splits on whitespace with ? ! . , : ; as standalone tokens.
  static std::vector<std::string> tokenize(const std::string& text);

  int id(const std::string& word) const;
  bool contains(const std::string& word) const;
  std::string word(int id) const;
  int size() const { return kReserved + static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

struct Slot {
  enum class Type { text, context, object };
  Type type = Type::text;
  int token_id = -1;    // text slots
  int index = -1;       // context row / object list index
  int object_id = -1;   // object slots
  bool answer_region = false;
  bool referring_placeholder = false;  // render as <o> instead of <oN>
};

struct TokenSequence {
  std::vector<Slot> slots;
  int context_count = 0;
  int object_count = 0;   // object slots present in the sequence
  int sep_position = -1;

  int length() const { return static_cast<int>(slots.size()); }
  std::vector<int> object_positions() const;
  /// Space-joined rendering for golden-file comparison: context slots as
  /// <v>, object slots as <oN> (or <o>), reserved ids as <sep>/<eos>.
  std::string render(const Vocab& vocab) const;
};

enum class PromptMode { general, referring };

/// The fixed object-list sentence of the general template (lowercased,
/// punctuation separated); callers building vocabularies need its words.
const std::string& object_list_sentence();

struct MissingObjectError : std::runtime_error {
  MissingObjectError() : std::runtime_error("referring prompt: object id not present") {}
};

/// Builds the prompt portion (through the separator). General mode:
/// context slots, then the object-list sentence with comma-separated object
/// slots (omitted entirely when there are no objects), then the instruction.
/// Referring mode: context slots, then the instruction with its <o>
/// placeholder replaced by the referred object's slot.
TokenSequence assemble_prompt(int context_count, const std::vector<int>& object_ids,
                              const std::string& instruction, PromptMode mode,
                              int referred_object_id, const Vocab& vocab, int max_len = 256);

/// Appends answer tokens plus eos, all marked as answer region.
void append_answer(TokenSequence& seq, const std::string& answer, const Vocab& vocab);

struct DecoderConfig {
  int dim = 64;
  int heads = 4;
  int layers = 2;
  int ff_hidden = 256;
  int max_len = 256;
};

/// Pre-norm causal transformer over mixed text/context/object slots.
struct DecoderParams {
  DecoderConfig cfg;
  TensorPtr tok_embedding;  // [V x d]
  TensorPtr pos_embedding;  // [max_len x d]
  std::vector<TransformerBlock> blocks;
  TensorPtr final_gain, final_bias;
  Linear head;

  static DecoderParams init(int vocab_size, const DecoderConfig& cfg, Rng& rng);
  void collect(const std::string& prefix, NamedParams& out) const;
};

struct ForwardResult {
  TensorPtr logits;                    // [L x V]
  std::vector<Tensor> attention;       // per layer, [heads x L x L]
};

/// Injected slots take their embeddings from context_tokens rows /
/// object_vectors entries instead of the embedding table.
ForwardResult decoder_forward(Graph& g, const TokenSequence& seq, const DecoderParams& dec,
                              TensorPtr context_tokens,
                              const std::vector<TensorPtr>& object_vectors);

/// Mean cross entropy over positions predicting answer-region tokens.
TensorPtr sequence_loss(Graph& g, const ForwardResult& fwd, const TokenSequence& seq);

/// Greedy argmax decoding until eos or max_new tokens; returns the decoded
/// words joined by single spaces.
std::string greedy_generate(const TokenSequence& prompt, const DecoderParams& dec,
                            const Vocab& vocab, TensorPtr context_tokens,
                            const std::vector<TensorPtr>& object_vectors, int max_new);

/// Normalized last-layer attention over object slots: averaged over heads
/// and over the query positions that predict answer-region tokens, then
/// renormalized across object slots to sum to one. Requires at least one
/// object slot and a nonempty answer region.
std::vector<double> attention_report(const TokenSequence& seq, const DecoderParams& dec,
                                     TensorPtr context_tokens,
                                     const std::vector<TensorPtr>& object_vectors);

}  // namespace ovtok

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wmlab {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

/// Token inventory: BOS, EOS, optionally 256 byte-fallback tokens, then word
/// pieces. A piece is a whitespace-free word, optionally with one leading space.
class Vocabulary {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kFirstByte = 2;

  Vocabulary() : Vocabulary(std::vector<std::string>{}, true) {}
  Vocabulary(std::vector<std::string> pieces, bool byte_fallback);

  /// Collects pieces from whitespace-split documents. A word directly preceded
  /// by a single space becomes " word", otherwise "word". Keeps pieces seen at
  /// least min_count times, most frequent first, at most max_pieces of them.
  static Vocabulary build(std::span<const std::string> documents, std::size_t max_pieces,
                          std::size_t min_count = 1);

  std::size_t size() const { return display_.size(); }
  bool has_byte_fallback() const { return byte_fallback_; }
  TokenId first_piece() const { return first_piece_; }

  /// Unique display string ("<s>", "</s>", "<0x41>", or the piece itself).
  const std::string& display(TokenId id) const { return display_.at(id); }
  /// Bytes the token contributes to detokenized text.
  std::string_view surface(TokenId id) const;

  bool is_special(TokenId id) const { return id == kBos || id == kEos; }
  bool is_byte(TokenId id) const {
    return byte_fallback_ && id >= kFirstByte && id < kFirstByte + 256;
  }

  std::optional<TokenId> find_piece(std::string_view piece) const;
  std::size_t max_piece_length() const { return max_piece_length_; }

  /// Word pieces in id order (without specials and byte tokens).
  std::vector<std::string> pieces() const;

  bool operator==(const Vocabulary& other) const {
    return byte_fallback_ == other.byte_fallback_ && display_ == other.display_;
  }

 private:
  bool byte_fallback_ = true;
  TokenId first_piece_ = 0;
  std::vector<std::string> display_;
  std::vector<std::string> byte_surface_;
  std::unordered_map<std::string, TokenId> piece_index_;
  std::size_t max_piece_length_ = 0;
};

/// Greedy longest-match inside each whitespace-delimited word, trying the
/// space-prefixed piece first. Unmatched bytes become byte tokens, so
/// detokenize(tokenize(s)) == s for every byte string when byte fallback is on.
/// Without byte fallback an unmatched byte throws DataError.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab);

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab);

}  // namespace wmlab

#include "wmlab/tokenizer.hpp"

#include <algorithm>
#include <map>

#include "wmlab/error.hpp"

namespace wmlab {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::size_t word_end(std::string_view text, std::size_t i) {
  while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
  return i;
}

bool valid_piece(std::string_view piece) {
  if (piece.empty()) return false;
  std::size_t start = piece[0] == ' ' ? 1 : 0;
  if (start == piece.size()) return false;
  for (std::size_t i = start; i < piece.size(); ++i) {
    if (is_space(static_cast<unsigned char>(piece[i]))) return false;
  }
  return true;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> pieces, bool byte_fallback)
    : byte_fallback_(byte_fallback) {
  display_.push_back("<s>");
  display_.push_back("</s>");
  if (byte_fallback_) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    for (int b = 0; b < 256; ++b) {
      display_.push_back(std::string("<0x") + kHex[b >> 4] + kHex[b & 0xF] + ">");
      byte_surface_.emplace_back(1, static_cast<char>(b));
    }
  }
  first_piece_ = static_cast<TokenId>(display_.size());
  for (auto& piece : pieces) {
    if (!valid_piece(piece)) throw ValidationError("invalid vocabulary piece: '" + piece + "'");
    const auto id = static_cast<TokenId>(display_.size());
    if (!piece_index_.emplace(piece, id).second) {
      throw ValidationError("duplicate vocabulary piece: '" + piece + "'");
    }
    if (std::find(display_.begin(), display_.begin() + first_piece_, piece) !=
        display_.begin() + first_piece_) {
      throw ValidationError("vocabulary piece collides with a reserved token: '" + piece + "'");
    }
    max_piece_length_ = std::max(max_piece_length_, piece.size());
    display_.push_back(std::move(piece));
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> documents, std::size_t max_pieces,
                             std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : documents) {
    std::string_view text(doc);
    std::size_t i = 0;
    while (i < text.size()) {
      if (is_space(static_cast<unsigned char>(text[i]))) {
        ++i;
        continue;
      }
      const std::size_t end = word_end(text, i);
      const bool spaced = i > 0 && text[i - 1] == ' ';
      std::string piece = spaced ? " " : "";
      piece.append(text.substr(i, end - i));
      ++counts[piece];
      i = end;
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> pieces;
  for (auto& [piece, count] : ranked) {
    if (pieces.size() >= max_pieces || count < min_count) break;
    pieces.push_back(piece);
  }
  return Vocabulary(std::move(pieces), true);
}

std::string_view Vocabulary::surface(TokenId id) const {
  if (id >= display_.size()) throw ValidationError("token id out of range");
  if (is_special(id)) return {};
  if (is_byte(id)) return byte_surface_[id - kFirstByte];
  return display_[id];
}

std::optional<TokenId> Vocabulary::find_piece(std::string_view piece) const {
  auto it = piece_index_.find(std::string(piece));
  if (it == piece_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Vocabulary::pieces() const {
  return {display_.begin() + first_piece_, display_.end()};
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSequence out;
  const std::size_t max_len = vocab.max_piece_length();
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t region_end = i;
    if (c == ' ' && i + 1 < text.size() && !is_space(static_cast<unsigned char>(text[i + 1]))) {
      region_end = word_end(text, i + 1);
    } else if (!is_space(c)) {
      region_end = word_end(text, i);
    }
    bool matched = false;
    for (std::size_t len = std::min(region_end - i, max_len); len > 0; --len) {
      if (auto id = vocab.find_piece(text.substr(i, len))) {
        out.push_back(*id);
        i += len;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (!vocab.has_byte_fallback()) {
      throw DataError("text contains bytes outside the vocabulary and byte fallback is off");
    }
    out.push_back(Vocabulary::kFirstByte + c);
    ++i;
  }
  return out;
}

std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (auto id : ids) out.append(vocab.surface(id));
  return out;
}

}  // namespace wmlab

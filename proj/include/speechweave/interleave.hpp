// include/speechweave/interleave.hpp

// Copyright 2026  The speechweave Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Rendering and parsing of speech-text training examples.
//
// Interleaved response:
//   [question]: <text question>; [answer]: <chunk 1><sosp><t><t>...<eosp><chunk 2><sosp>...<eosp>
// Full chain-of-modality response:
//   [question]: <text question>; [answer]: <whole answer><sosp>...<eosp>
// The "[question]: ...; " part is optional. Speech tokens are written in
// run-length merged form; the repeat counts travel next to the markup.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "speechweave/chunker.hpp"
#include "speechweave/error.hpp"
#include "speechweave/seed.hpp"
#include "speechweave/token_codec.hpp"

namespace speechweave {

inline constexpr std::string_view kSpeechOpen = "<sosp>";
inline constexpr std::string_view kSpeechClose = "<eosp>";
inline constexpr std::string_view kQuestionTag = "[question]: ";
inline constexpr std::string_view kAnswerTag = "[answer]: ";
inline constexpr std::string_view kQuestionAnswerSeparator = "; ";
inline constexpr std::string_view kDefaultSpeechInstruction =
    "Please directly answer the questions in the user's speech.";

struct ConversationPair {
  std::string question_text;
  SpeechTokenSequence question_tokens;
  std::string answer_text;
  SpeechTokenSequence answer_tokens;
  std::vector<TextChunk> answer_chunks;
};

struct RenderOptions {
  bool include_text_question = true;
  // Write speech tokens run-length merged; false writes every frame.
  bool merge_speech = true;
  std::string instruction = std::string(kDefaultSpeechInstruction);
};

struct InterleavedExample {
  std::string prompt;
  std::string response;
  // Run counts of the question block in the prompt.
  std::vector<RunCount> prompt_run_counts;
  // Run counts of each speech block of the response, in order.
  std::vector<std::vector<RunCount>> response_run_counts;
};

enum class SegmentKind { text, speech };

struct MarkupSegment {
  SegmentKind kind = SegmentKind::text;
  std::string text;
  std::vector<TokenId> tokens;
  // Byte offset in the parsed string.
  std::size_t offset = 0;
};

namespace detail {

inline void append_speech_block(std::string& out, std::span<const TokenId> tokens) {
  out += kSpeechOpen;
  for (TokenId t : tokens) {
    out += '<';
    out += std::to_string(t);
    out += '>';
  }
  out += kSpeechClose;
}

inline std::pair<std::vector<TokenId>, std::vector<RunCount>> speech_payload(
    std::span<const TokenId> tokens, std::uint32_t vocab, bool merge) {
  if (!merge) {
    check_tokens(tokens, vocab);
    return {std::vector<TokenId>(tokens.begin(), tokens.end()),
            std::vector<RunCount>(tokens.size(), 1)};
  }
  SpeechTokenSequence s;
  s.tokens.assign(tokens.begin(), tokens.end());
  s.vocab_size = vocab;
  const auto m = merge_runs(s);
  return {m.tokens(), m.counts()};
}

inline void check_plain_text(std::string_view s, std::string_view what) {
  if (s.find(kSpeechOpen) != std::string_view::npos ||
      s.find(kSpeechClose) != std::string_view::npos) {
    throw PreconditionError(std::string(what) + " contains a speech marker");
  }
}

inline std::string render_prompt(const ConversationPair& pair, const RenderOptions& opt,
                                 std::vector<RunCount>& counts) {
  if (pair.question_tokens.tokens.empty()) throw PreconditionError("question has no speech tokens");
  auto [toks, cnts] =
      speech_payload(pair.question_tokens.tokens, pair.question_tokens.vocab_size, opt.merge_speech);
  counts = std::move(cnts);
  std::string p = opt.instruction;
  p += " This is input: ";
  append_speech_block(p, toks);
  p += '.';
  return p;
}

inline std::string response_head(const ConversationPair& pair, const RenderOptions& opt) {
  std::string r;
  if (opt.include_text_question) {
    if (pair.question_text.empty()) throw PreconditionError("question text is empty");
    check_plain_text(pair.question_text, "question text");
    r += kQuestionTag;
    r += pair.question_text;
    r += kQuestionAnswerSeparator;
  }
  r += kAnswerTag;
  return r;
}

}  // namespace detail

inline InterleavedExample render_interleaved(const ConversationPair& pair,
                                             const RenderOptions& opt = {}) {
  const auto& chunks = pair.answer_chunks;
  const auto& tokens = pair.answer_tokens.tokens;
  if (chunks.empty()) throw PreconditionError("answer has no chunks");
  if (tokens.empty()) throw PreconditionError("answer has no speech tokens");
  if (reconstruct_text(chunks) != pair.answer_text) {
    throw PreconditionError("chunks do not reconstruct the answer text");
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (!chunks[i].tokens) {
      throw PreconditionError("chunk " + std::to_string(i) + " has no speech span assigned");
    }
    if (chunks[i].tokens->start != next || chunks[i].tokens->end < chunks[i].tokens->start) {
      throw PreconditionError("chunk spans do not partition the answer tokens");
    }
    if (chunks[i].text.empty()) throw PreconditionError("chunk " + std::to_string(i) + " is empty");
    detail::check_plain_text(chunks[i].text, "chunk text");
    next = chunks[i].tokens->end + 1;
  }
  if (next != tokens.size()) throw PreconditionError("chunk spans do not cover the answer tokens");

  InterleavedExample ex;
  ex.prompt = detail::render_prompt(pair, opt, ex.prompt_run_counts);
  ex.response = detail::response_head(pair, opt);
  for (const auto& c : chunks) {
    std::span<const TokenId> span(tokens.data() + c.tokens->start, c.tokens->length());
    auto [toks, cnts] = detail::speech_payload(span, pair.answer_tokens.vocab_size, opt.merge_speech);
    ex.response += c.text;
    detail::append_speech_block(ex.response, toks);
    ex.response_run_counts.push_back(std::move(cnts));
  }
  return ex;
}

inline InterleavedExample render_interleaved(const ConversationPair& pair,
                                             bool include_text_question) {
  RenderOptions opt;
  opt.include_text_question = include_text_question;
  return render_interleaved(pair, opt);
}

inline InterleavedExample render_full_com(const ConversationPair& pair,
                                          const RenderOptions& opt = {}) {
  if (pair.answer_text.empty()) throw PreconditionError("answer text is empty");
  if (pair.answer_tokens.tokens.empty()) throw PreconditionError("answer has no speech tokens");
  detail::check_plain_text(pair.answer_text, "answer text");
  InterleavedExample ex;
  ex.prompt = detail::render_prompt(pair, opt, ex.prompt_run_counts);
  ex.response = detail::response_head(pair, opt);
  auto [toks, cnts] = detail::speech_payload(pair.answer_tokens.tokens,
                                             pair.answer_tokens.vocab_size, opt.merge_speech);
  ex.response += pair.answer_text;
  detail::append_speech_block(ex.response, toks);
  ex.response_run_counts.push_back(std::move(cnts));
  return ex;
}

inline InterleavedExample render_full_com(const ConversationPair& pair,
                                          bool include_text_question) {
  RenderOptions opt;
  opt.include_text_question = include_text_question;
  return render_full_com(pair, opt);
}

// Splits markup into text and speech segments. Whitespace between tokens in
// a speech block is tolerated. Empty text between blocks yields no segment.
inline std::vector<MarkupSegment> parse_markup(std::string_view s) {
  std::vector<MarkupSegment> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t open = s.find(kSpeechOpen, pos);
    const std::size_t close = s.find(kSpeechClose, pos);
    if (close != std::string_view::npos && (open == std::string_view::npos || close < open)) {
      throw MarkupError(close, "unbalanced <eosp> at byte " + std::to_string(close));
    }
    const std::size_t text_end = open == std::string_view::npos ? s.size() : open;
    if (text_end > pos) {
      out.push_back({SegmentKind::text, std::string(s.substr(pos, text_end - pos)), {}, pos});
    }
    if (open == std::string_view::npos) break;

    const std::size_t body = open + kSpeechOpen.size();
    const std::size_t end = s.find(kSpeechClose, body);
    if (end == std::string_view::npos) {
      throw MarkupError(open, "unterminated <sosp> at byte " + std::to_string(open));
    }
    const std::size_t nested = s.find(kSpeechOpen, body);
    if (nested != std::string_view::npos && nested < end) {
      throw MarkupError(nested, "nested <sosp> at byte " + std::to_string(nested));
    }
    MarkupSegment seg{SegmentKind::speech, {}, {}, open};
    std::size_t i = body;
    while (i < end) {
      const char c = s[i];
      if (c == ' ' || c == '\n' || c == '\t' || c == '\r') {
        ++i;
        continue;
      }
      const std::size_t gt = s.find('>', i);
      if (c != '<' || gt == std::string_view::npos || gt > end || gt == i + 1) {
        throw InvalidTokenError(i, "malformed speech token at byte " + std::to_string(i));
      }
      std::uint64_t v = 0;
      for (std::size_t k = i + 1; k < gt; ++k) {
        if (s[k] < '0' || s[k] > '9' || v > 0xFFFFFFFFull / 10) {
          throw InvalidTokenError(i, "non-integer speech token at byte " + std::to_string(i));
        }
        v = v * 10 + static_cast<std::uint64_t>(s[k] - '0');
      }
      if (v > 0xFFFFFFFFull) {
        throw InvalidTokenError(i, "speech token out of range at byte " + std::to_string(i));
      }
      seg.tokens.push_back(static_cast<TokenId>(v));
      i = gt + 1;
    }
    if (seg.tokens.empty()) throw MarkupError(open, "empty speech block at byte " + std::to_string(open));
    out.push_back(std::move(seg));
    pos = end + kSpeechClose.size();
  }
  return out;
}

struct DecodedResponse {
  std::optional<std::string> question_text;
  std::vector<std::string> answer_texts;
  std::vector<std::vector<TokenId>> speech_spans;
};

// Inverse of the response rendering. Requires strict text/speech
// alternation starting with text and ending with speech.
inline DecodedResponse decode_response(std::string_view response) {
  const auto segs = parse_markup(response);
  if (segs.empty() || segs.front().kind != SegmentKind::text) {
    throw MarkupError(0, "response must start with text");
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const SegmentKind want = i % 2 == 0 ? SegmentKind::text : SegmentKind::speech;
    if (segs[i].kind != want) {
      throw MarkupError(segs[i].offset, "text and speech segments do not alternate");
    }
  }
  if (segs.back().kind != SegmentKind::speech) {
    throw MarkupError(segs.back().offset, "response ends with text after the last speech block");
  }
  DecodedResponse d;
  std::string_view head = segs.front().text;
  if (head.starts_with(kQuestionTag)) {
    std::string sep = std::string(kQuestionAnswerSeparator) + std::string(kAnswerTag);
    const std::size_t at = head.find(sep, kQuestionTag.size());
    if (at == std::string_view::npos) throw MarkupError(0, "question segment lacks an answer tag");
    d.question_text = std::string(head.substr(kQuestionTag.size(), at - kQuestionTag.size()));
    head.remove_prefix(at + sep.size());
  } else if (head.starts_with(kAnswerTag)) {
    head.remove_prefix(kAnswerTag.size());
  } else {
    throw MarkupError(0, "response lacks an answer tag");
  }
  for (std::size_t i = 0; i < segs.size(); i += 2) {
    d.answer_texts.push_back(i == 0 ? std::string(head) : segs[i].text);
    d.speech_spans.push_back(segs[i + 1].tokens);
  }
  return d;
}

enum class InstructionTask { asr, tts, mt, s2s };

inline InstructionTask instruction_task_from_string(std::string_view s) {
  if (s == "asr") return InstructionTask::asr;
  if (s == "tts") return InstructionTask::tts;
  if (s == "mt") return InstructionTask::mt;
  if (s == "s2s") return InstructionTask::s2s;
  throw ConfigError("unknown instruction task '" + std::string(s) + "'");
}

// Templates keyed by task and language ("en", "zh", or a direction such as
// "en-zh" for translation).
class InstructionTemplateBank {
 public:
  void add(InstructionTask task, std::string language, std::vector<std::string> templates) {
    if (templates.empty()) throw ConfigError("template list must not be empty");
    bank_[{task, std::move(language)}] = std::move(templates);
  }
  const std::vector<std::string>& templates(InstructionTask task, const std::string& language) const {
    auto it = bank_.find({task, language});
    if (it == bank_.end()) {
      throw LookupError("no instruction templates for language '" + language + "'");
    }
    return it->second;
  }
  bool contains(InstructionTask task, const std::string& language) const {
    return bank_.contains({task, language});
  }

 private:
  std::map<std::pair<InstructionTask, std::string>, std::vector<std::string>> bank_;
};

inline InstructionTemplateBank default_instruction_bank() {
  InstructionTemplateBank b;
  b.add(InstructionTask::asr, "en",
        {"Convert the following audio into written English text.",
         "Decode the English phrases from the attached audio.",
         "Transcribe the English speech below into text.",
         "Write down what is said in this English recording.",
         "Turn the spoken English in this audio into text.",
         "Listen to the audio and type out the English words.",
         "Produce an English transcript of the following speech.",
         "Recognize the English speech and output it as text.",
         "Give the written form of this English audio clip.",
         "Convert this English utterance into a text transcript."});
  b.add(InstructionTask::asr, "zh",
        {"将以下音频转换为中文文本。", "识别这段音频中的中文内容。", "请把下面的中文语音转写成文字。",
         "写出这段录音中说的中文。", "把音频里的中文口语转成文本。", "听这段音频并输出中文文字。",
         "为以下语音生成中文转写。", "识别中文语音并以文本形式输出。", "给出这段中文音频的文字内容。",
         "把这句中文话语转写为文本。"});
  b.add(InstructionTask::tts, "en",
        {"Convert this English text into speech.", "Produce English audio from the given text.",
         "Read the following English text aloud.", "Synthesize speech for this English sentence.",
         "Turn the English text below into spoken audio.", "Say the following English text.",
         "Generate an English voice recording of this text.",
         "Speak the English passage that follows.", "Create English speech from the text below.",
         "Vocalize the following English words."});
  b.add(InstructionTask::tts, "zh",
        {"将这段中文文本转换为语音。", "根据给定文本生成中文音频。", "朗读下面的中文文本。",
         "为这句中文合成语音。", "把下面的中文文字变成语音。", "说出以下中文内容。",
         "生成这段文本的中文录音。", "用中文读出下面这段话。", "根据下面的文本生成中文语音。",
         "把以下中文词句念出来。"});
  b.add(InstructionTask::mt, "en-zh",
        {"Convert the English text below into Chinese.",
         "Change the English content below into Chinese.",
         "Translate the following English text into Chinese.",
         "Render this English passage in Chinese.", "Give the Chinese translation of this text.",
         "Rewrite the English sentence below in Chinese.",
         "Express the following English content in Chinese.",
         "Provide a Chinese version of the English text below.",
         "Turn this English text into Chinese.", "Translate the English below to Chinese."});
  b.add(InstructionTask::mt, "zh-en",
        {"Convert the Chinese text below into English.",
         "Change the Chinese content below into English.",
         "Translate the following Chinese text into English.",
         "Render this Chinese passage in English.", "Give the English translation of this text.",
         "Rewrite the Chinese sentence below in English.",
         "Express the following Chinese content in English.",
         "Provide an English version of the Chinese text below.",
         "Turn this Chinese text into English.", "Translate the Chinese below to English."});
  b.add(InstructionTask::s2s, "en",
        {std::string(kDefaultSpeechInstruction),
         "Respond directly to the question in the user's speech.",
         "Answer the spoken question below.", "Listen to the user's speech and reply to it.",
         "Give a spoken answer to the user's question.",
         "Reply to what the user asks in this audio.",
         "Answer the question contained in the speech input.",
         "Respond to the user's spoken request.", "Provide an answer to the question in the audio.",
         "Address the question the user asks in speech."});
  b.add(InstructionTask::s2s, "zh",
        {"请直接回答用户语音中的问题。", "请回应用户语音里的提问。", "回答下面语音中的问题。",
         "听用户的语音并作出回答。", "用语音回答用户的问题。", "回复用户在音频中提出的问题。",
         "回答语音输入中包含的问题。", "回应用户的语音请求。", "给出音频中问题的答案。",
         "解答用户在语音中提出的问题。"});
  return b;
}

inline const std::string& sample_instruction(const InstructionTemplateBank& bank,
                                             InstructionTask task, const std::string& language,
                                             std::uint64_t seed) {
  const auto& t = bank.templates(task, language);
  return t[mix_seed(seed) % t.size()];
}

}  // namespace speechweave

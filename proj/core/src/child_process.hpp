#pragma once

#include <cstdio>
#include <string>
#include <string_view>

namespace wmlab::detail {

/// Persistent /bin/sh -c child with pipes on stdin and stdout.
class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command);
  ~ChildProcess();
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  /// Writes "<bytes>\n<text>" and flushes.
  void send_framed(std::string_view text);
  /// One line without the trailing newline; throws DataError at end of stream.
  std::string read_line();
  std::string read_exact(std::size_t n);
  const std::string& command() const { return command_; }

 private:
  std::string command_;
  int pid_ = -1;
  FILE* to_child_ = nullptr;
  FILE* from_child_ = nullptr;
};

}  // namespace wmlab::detail

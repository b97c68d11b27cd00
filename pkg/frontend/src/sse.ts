// Server-sent event reader built on fetch streaming instead of
// EventSource, so we can send the X-User header and resume with
// Last-Event-ID after a dropped connection.

export interface SseMessage {
  id: string | null;
  event: string;
  data: string;
}

/** Incremental parser; feed it raw chunks, collect complete messages. */
export class SseParser {
  private buffer = "";

  push(chunk: string): SseMessage[] {
    this.buffer += chunk;
    const messages: SseMessage[] = [];
    let split: number;
    while ((split = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, split);
      this.buffer = this.buffer.slice(split + 2);
      const message: SseMessage = { id: null, event: "message", data: "" };
      const dataLines: string[] = [];
      for (const line of block.split("\n")) {
        if (line.startsWith("id:")) {
          message.id = line.slice(3).trim();
        } else if (line.startsWith("event:")) {
          message.event = line.slice(6).trim();
        } else if (line.startsWith("data:")) {
          dataLines.push(line.slice(5).trimStart());
        }
        // comment lines (":") and unknown fields are ignored
      }
      message.data = dataLines.join("\n");
      messages.push(message);
    }
    return messages;
  }
}

export interface StreamHandle {
  close(): void;
  done: Promise<void>;
}

export interface StreamOptions {
  headers?: Record<string, string>;
  /** Reconnect delay in ms; also the polling floor for retries. */
  retryMs?: number;
  onMessage: (message: SseMessage) => void;
}

/**
 * Consume an SSE endpoint until the server signals "end".
 *
 * On transport failure the stream reconnects with Last-Event-ID so the
 * server replays only what was missed. close() stops everything.
 */
export function openStream(url: string, options: StreamOptions): StreamHandle {
  const controller = new AbortController();
  const retryMs = options.retryMs ?? 500;
  let lastEventId: string | null = null;
  let closed = false;

  const done = (async () => {
    while (!closed) {
      const headers: Record<string, string> = {
        Accept: "text/event-stream",
        ...options.headers,
      };
      if (lastEventId !== null) headers["Last-Event-ID"] = lastEventId;
      try {
        const resp = await fetch(url, { headers, signal: controller.signal });
        if (!resp.ok || resp.body === null) {
          throw new Error(`stream request failed: ${resp.status}`);
        }
        const reader = resp.body.getReader();
        const decoder = new TextDecoder();
        const parser = new SseParser();
        for (;;) {
          const { value, done: eof } = await reader.read();
          if (eof) break;
          for (const message of parser.push(decoder.decode(value, { stream: true }))) {
            if (message.id !== null) lastEventId = message.id;
            if (message.event === "end") {
              closed = true;
              return;
            }
            options.onMessage(message);
          }
        }
        // stream closed without the end marker: fall through to reconnect
      } catch {
        if (closed || controller.signal.aborted) return;
      }
      await new Promise((resolve) => setTimeout(resolve, retryMs));
    }
  })();

  return {
    close() {
      closed = true;
      controller.abort();
    },
    done,
  };
}

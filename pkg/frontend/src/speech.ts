// Announcement queue over a pluggable speech port.
//
// Exactly one utterance is issued per announce() call. Utterances never
// overlap: the queue speaks them strictly in order. Speech is additive to the
// visible large-type result, never the sole channel, so a missing or muted
// synthesizer degrades gracefully.

export interface UtteranceRequest {
  text: string;
  lang: string;
}

export interface VoiceInfo {
  name: string;
  lang: string;
}

export interface SpeechPort {
  /** Speak one utterance; call onDone exactly once when it ends or fails. */
  speak(req: UtteranceRequest, onDone: () => void): void;
  /** Stop the current utterance, if any. */
  cancel(): void;
  voices(): VoiceInfo[];
}

export const AMHARIC_LANG = "am-ET";

export class Announcer {
  private queue: UtteranceRequest[] = [];
  private speaking = false;
  private spokenCount = 0;
  private generation = 0;

  constructor(private readonly port: SpeechPort,
              private readonly preferredLang: string = AMHARIC_LANG) {}

  /** True when a voice matching the preferred language is installed. */
  hasPreferredVoice(): boolean {
    const prefix = this.preferredLang.split("-")[0].toLowerCase();
    return this.port.voices().some(v => v.lang.toLowerCase().startsWith(prefix));
  }

  /**
   * Queue exactly one utterance. The preferred-language text is used when a
   * matching voice exists; otherwise the fallback (Latin transliteration)
   * is spoken so the announcement stays honest about what the device can say.
   */
  announce(preferredText: string, fallbackText: string): void {
    const usePreferred = this.hasPreferredVoice();
    this.queue.push({
      text: usePreferred ? preferredText : fallbackText,
      lang: usePreferred ? this.preferredLang : "en",
    });
    this.pump();
  }

  /** Drop queued utterances and stop the current one (capture interrupt). */
  cancelPending(): void {
    this.queue = [];
    // stale completion callbacks from a canceled utterance must not unblock
    // or double-advance the queue, whether or not the port fires them
    this.generation += 1;
    if (this.speaking) {
      this.port.cancel();
      this.speaking = false;
    }
  }

  get utterancesSpoken(): number {
    return this.spokenCount;
  }

  get pending(): number {
    return this.queue.length;
  }

  private pump(): void {
    if (this.speaking) {
      return;
    }
    const next = this.queue.shift();
    if (!next) {
      return;
    }
    this.speaking = true;
    this.spokenCount += 1;
    const gen = this.generation;
    let finished = false;
    this.port.speak(next, () => {
      if (finished || gen !== this.generation) {
        return;
      }
      finished = true;
      this.speaking = false;
      this.pump();
    });
  }
}

/** Adapter over the browser's built-in synthesizer. */
export function browserSpeechPort(synth: SpeechSynthesis): SpeechPort {
  return {
    speak(req, onDone) {
      const utterance = new SpeechSynthesisUtterance(req.text);
      utterance.lang = req.lang;
      const voice = synth.getVoices().find(
        v => v.lang.toLowerCase().startsWith(req.lang.split("-")[0].toLowerCase()));
      if (voice) {
        utterance.voice = voice;
      }
      utterance.onend = () => onDone();
      utterance.onerror = () => onDone();
      synth.speak(utterance);
    },
    cancel() {
      synth.cancel();
    },
    voices() {
      return synth.getVoices().map(v => ({ name: v.name, lang: v.lang }));
    },
  };
}

/** Silent port for platforms without speech synthesis. */
export function nullSpeechPort(): SpeechPort {
  return {
    speak(_req, onDone) {
      onDone();
    },
    cancel() {},
    voices() {
      return [];
    },
  };
}

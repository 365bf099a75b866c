// Face counting sources. The sampling loop is generic over a detect()
// function so the webcam path and the manual buttons share the emit logic
// and the loop is testable without a camera.

export type FaceCountSink = (count: number) => void;

export interface FaceSource {
  start(): void;
  stop(): void;
}

export const SAMPLE_MS = 150; // ~6.7 Hz, above the 5 Hz floor

interface LoopOpts {
  detect: () => Promise<number>;
  sink: FaceCountSink;
  onFailure?: (err: unknown) => void;
  sampleMs?: number;
  setIntervalFn?: typeof setInterval;
  clearIntervalFn?: typeof clearInterval;
}

/** Polls detect() on a timer. Detector failures emit count 0 so a broken
 * camera behaves like an empty room rather than a stuck state. */
export class SamplingFaceSource implements FaceSource {
  private timer: ReturnType<typeof setInterval> | null = null;
  private busy = false;

  constructor(private opts: LoopOpts) {}

  start(): void {
    if (this.timer !== null) return;
    const setI = this.opts.setIntervalFn ?? setInterval;
    this.timer = setI(() => void this.sample(), this.opts.sampleMs ?? SAMPLE_MS);
  }

  async sample(): Promise<void> {
    if (this.busy) return;
    this.busy = true;
    try {
      this.opts.sink(await this.opts.detect());
    } catch (err) {
      this.opts.onFailure?.(err);
      this.opts.sink(0);
    } finally {
      this.busy = false;
    }
  }

  stop(): void {
    if (this.timer !== null) {
      (this.opts.clearIntervalFn ?? clearInterval)(this.timer);
      this.timer = null;
    }
  }
}

/** Manual 0/1/2 buttons: keeps re-sending the selected count on the same
 * cadence as the camera so the gateway's staleness timeout never fires. */
export class ManualFaceSource implements FaceSource {
  private count = 0;
  private inner: SamplingFaceSource;

  constructor(sink: FaceCountSink, sampleMs?: number,
              setIntervalFn?: typeof setInterval,
              clearIntervalFn?: typeof clearInterval) {
    this.inner = new SamplingFaceSource({
      detect: async () => this.count,
      sink,
      sampleMs,
      setIntervalFn,
      clearIntervalFn,
    });
  }

  select(count: 0 | 1 | 2): void {
    this.count = count;
  }

  start(): void {
    this.inner.start();
  }

  stop(): void {
    this.inner.stop();
  }
}

// Browser-only below this line.

interface ShapeDetectorish {
  detect(src: unknown): Promise<unknown[]>;
}

declare global {
  interface Window {
    FaceDetector?: new (opts?: { fastMode?: boolean }) => ShapeDetectorish;
  }
}

/** Webcam source using the ShapeDetection FaceDetector where available. */
export function webcamFaceSource(
  video: HTMLVideoElement,
  sink: FaceCountSink,
  onFailure: (err: unknown) => void,
): FaceSource | null {
  if (typeof window === "undefined" || !window.FaceDetector) return null;
  const detector = new window.FaceDetector({ fastMode: true });
  return new SamplingFaceSource({
    detect: async () => (await detector.detect(video)).length,
    sink,
    onFailure,
  });
}

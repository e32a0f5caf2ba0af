// Resolution tiers and the client-side downscale plan. The service
// re-degrades authoritatively when a tier is passed; the client preview
// mirrors the same never-upsample rule.

export const TIER_HEIGHTS = [144, 360, 720, 1080, 1440] as const;

export interface TierPlan {
  tier: number;
  width: number;
  height: number;
  /** Source was already at or below this tier: submit it untouched. */
  native: boolean;
}

export function planTier(srcWidth: number, srcHeight: number, tier: number): TierPlan {
  if (srcHeight <= tier) {
    return { tier, width: srcWidth, height: srcHeight, native: true };
  }
  const width = Math.max(1, Math.round((srcWidth * tier) / srcHeight));
  return { tier, width, height: tier, native: false };
}

export function planAllTiers(srcWidth: number, srcHeight: number): TierPlan[] {
  return TIER_HEIGHTS.map((t) => planTier(srcWidth, srcHeight, t));
}

/** Canvas resample to the plan's geometry; returns the source blob untouched
 * for native plans. Browser-only (needs canvas + createImageBitmap). */
export async function downscaleToPlan(image: Blob, plan: TierPlan): Promise<Blob> {
  if (plan.native) return image;
  const bitmap = await createImageBitmap(image);
  try {
    const canvas = document.createElement("canvas");
    canvas.width = plan.width;
    canvas.height = plan.height;
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("canvas 2d context unavailable");
    ctx.drawImage(bitmap, 0, 0, plan.width, plan.height);
    const blob = await new Promise<Blob | null>((resolve) =>
      canvas.toBlob(resolve, "image/png"),
    );
    if (!blob) throw new Error("canvas encoding failed");
    return blob;
  } finally {
    bitmap.close();
  }
}

package com.example.clock;

import android.os.Build;
import android.widget.TimePicker;

public class ClockActivity {
    private TimePicker timePicker;

    public int readHour() {
        int hour;
        if (Build.VERSION.SDK_INT >= Build.VERSION_CODES.M) {
            hour = timePicker.getHour();
        } else {
            hour = timePicker.getCurrentHour();
        }
        return hour;
    }
}
